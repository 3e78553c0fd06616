#pragma once

#include "joininfer/decomposition.hpp"
#include "joininfer/error.hpp"
#include "joininfer/hyjar.hpp"
#include "joininfer/inference.hpp"
#include "joininfer/join.hpp"
#include "joininfer/metrics.hpp"
#include "joininfer/model.hpp"
#include "joininfer/oracle.hpp"
#include "joininfer/preprocess.hpp"
#include "joininfer/propagation.hpp"
#include "joininfer/simplex.hpp"
#include "joininfer/storage.hpp"
#include "joininfer/uai.hpp"
