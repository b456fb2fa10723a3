#pragma once

#include "novo/ablation.hpp"
#include "novo/analysis.hpp"
#include "novo/capture.hpp"
#include "novo/capture_io.hpp"
#include "novo/error.hpp"
#include "novo/report.hpp"
#include "novo/selection.hpp"
#include "novo/stats.hpp"
#include "novo/voter_set.hpp"
#include "novo/voting.hpp"
