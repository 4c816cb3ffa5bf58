// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wildground/gradcheck.hpp"
#include "wildground/ops.hpp"
#include "wildground/tensor.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_wildground, m) {
  m.doc() = "wildground: multi-frame 3D visual grounding on synthetic scenes";
  m.attr("__version__") = "0.1.0";
}
