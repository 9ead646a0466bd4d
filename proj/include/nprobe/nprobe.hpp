#pragma once

#include "nprobe/activations.hpp"
#include "nprobe/control.hpp"
#include "nprobe/corpus.hpp"
#include "nprobe/distribution.hpp"
#include "nprobe/error.hpp"
#include "nprobe/layer_analysis.hpp"
#include "nprobe/matrix.hpp"
#include "nprobe/neuron_analysis.hpp"
#include "nprobe/pipeline.hpp"
#include "nprobe/preprocess.hpp"
#include "nprobe/probe.hpp"
#include "nprobe/random.hpp"
#include "nprobe/synthetic.hpp"
