#pragma once

#include "bridle/codebook_training.hpp"
#include "bridle/config.hpp"
#include "bridle/error.hpp"
#include "bridle/harness/convergence.hpp"
#include "bridle/harness/data.hpp"
#include "bridle/harness/experiments.hpp"
#include "bridle/harness/models.hpp"
#include "bridle/harness/tokenizer.hpp"
#include "bridle/harness/training.hpp"
#include "bridle/io/archive.hpp"
#include "bridle/io/config_io.hpp"
#include "bridle/io/features.hpp"
#include "bridle/io/file.hpp"
#include "bridle/io/report.hpp"
#include "bridle/losses.hpp"
#include "bridle/matrix.hpp"
#include "bridle/metrics.hpp"
#include "bridle/quantizer.hpp"
#include "bridle/random.hpp"
