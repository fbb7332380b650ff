// Copyright 2026 The qadagrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include "qadagrad/codec.hpp"
#include "qadagrad/data.hpp"
#include "qadagrad/error.hpp"
#include "qadagrad/harness.hpp"
#include "qadagrad/optimizer.hpp"
#include "qadagrad/oracle.hpp"
#include "qadagrad/parallel.hpp"
#include "qadagrad/quantize.hpp"
#include "qadagrad/regret.hpp"
