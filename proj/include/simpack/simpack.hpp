#pragma once

#include "simpack/archive.hpp"
#include "simpack/bench.hpp"
#include "simpack/bytes.hpp"
#include "simpack/compressor.hpp"
#include "simpack/error.hpp"
#include "simpack/feature_cache.hpp"
#include "simpack/features.hpp"
#include "simpack/longrange.hpp"
#include "simpack/manifest.hpp"
#include "simpack/parallel.hpp"
#include "simpack/pnm.hpp"
#include "simpack/rng.hpp"
#include "simpack/similarity.hpp"
#include "simpack/synth.hpp"
