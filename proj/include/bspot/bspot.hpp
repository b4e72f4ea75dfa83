#pragma once

#include "bspot/analyzer.hpp"
#include "bspot/interpreter.hpp"
#include "bspot/label_store.hpp"
#include "bspot/parser.hpp"
#include "bspot/program.hpp"
#include "bspot/reporter.hpp"
#include "bspot/rng.hpp"
#include "bspot/trace.hpp"
#include "bspot/trace_io.hpp"
#include "bspot/validator.hpp"
