#pragma once

#include "convsl/errors.hpp"
#include "convsl/numgrid.hpp"
#include "convsl/fields.hpp"
#include "convsl/parallel.hpp"
#include "convsl/kernel_ops.hpp"
#include "convsl/forward.hpp"
#include "convsl/charfield.hpp"
#include "convsl/inverse.hpp"
#include "convsl/stability.hpp"
#include "convsl/problem_file.hpp"
