#pragma once

#include "tod/detection_eval.hpp"
#include "tod/error.hpp"
#include "tod/geom.hpp"
#include "tod/hypersearch.hpp"
#include "tod/latency.hpp"
#include "tod/mot_io.hpp"
#include "tod/pipeline.hpp"
#include "tod/report.hpp"
#include "tod/rng.hpp"
#include "tod/scheduler.hpp"
#include "tod/stream_sim.hpp"
#include "tod/synth.hpp"
