#ifndef OTAFL_OTAFL_HPP
#define OTAFL_OTAFL_HPP

#include "otafl/types.hpp"
#include "otafl/random.hpp"
#include "otafl/objectives.hpp"
#include "otafl/data.hpp"
#include "otafl/channel.hpp"
#include "otafl/sgd.hpp"
#include "otafl/codec.hpp"
#include "otafl/trainer.hpp"
#include "otafl/theory.hpp"
#include "otafl/config.hpp"
#include "otafl/metrics.hpp"
#include "otafl/harness.hpp"

#endif  // OTAFL_OTAFL_HPP
