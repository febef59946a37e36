#pragma once

#include "vocalbeat/beats_io.hpp"
#include "vocalbeat/binary_io.hpp"
#include "vocalbeat/decoder.hpp"
#include "vocalbeat/embedding.hpp"
#include "vocalbeat/error.hpp"
#include "vocalbeat/metrics.hpp"
#include "vocalbeat/model/adam.hpp"
#include "vocalbeat/model/attention.hpp"
#include "vocalbeat/model/checkpoint.hpp"
#include "vocalbeat/model/loss.hpp"
#include "vocalbeat/model/network.hpp"
#include "vocalbeat/model/params.hpp"
#include "vocalbeat/model/trainer.hpp"
#include "vocalbeat/parallel.hpp"
#include "vocalbeat/resample.hpp"
#include "vocalbeat/segmentation.hpp"
#include "vocalbeat/spectral.hpp"
#include "vocalbeat/types.hpp"
#include "vocalbeat/wav.hpp"
