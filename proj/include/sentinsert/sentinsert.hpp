/*
 * Copyright 2026 The sentinsert Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "sentinsert/baselines.hpp"
#include "sentinsert/config.hpp"
#include "sentinsert/dataset.hpp"
#include "sentinsert/embedding_file.hpp"
#include "sentinsert/fusion.hpp"
#include "sentinsert/ggn.hpp"
#include "sentinsert/gradcheck.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/harness.hpp"
#include "sentinsert/lgn.hpp"
#include "sentinsert/model.hpp"
#include "sentinsert/problem.hpp"
#include "sentinsert/text.hpp"
