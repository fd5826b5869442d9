#ifndef PRUNEKIT_PRUNEKIT_HPP_
#define PRUNEKIT_PRUNEKIT_HPP_

#include "prunekit/checkpoint.hpp"
#include "prunekit/config.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/experiment.hpp"
#include "prunekit/fixtures.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/metrics.hpp"
#include "prunekit/model.hpp"
#include "prunekit/optim.hpp"
#include "prunekit/pipeline.hpp"
#include "prunekit/prox.hpp"
#include "prunekit/pruner.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/trainable.hpp"

#endif  // PRUNEKIT_PRUNEKIT_HPP_
