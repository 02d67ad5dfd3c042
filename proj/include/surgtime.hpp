// Copyright 2026 The surgtime Authors
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

// Umbrella header.

#pragma once

#include "surgtime/cart.hpp"
#include "surgtime/config.hpp"
#include "surgtime/data_model.hpp"
#include "surgtime/ensembles.hpp"
#include "surgtime/errors.hpp"
#include "surgtime/evaluation.hpp"
#include "surgtime/metric.hpp"
#include "surgtime/predictors.hpp"
#include "surgtime/serialize.hpp"
#include "surgtime/synth.hpp"
