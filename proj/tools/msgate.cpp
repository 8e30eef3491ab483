// Copyright 2026 The msgate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// msgate command-line tool. See include/msgate/cli.hpp for usage.

#include <iostream>

#include "msgate/cli.hpp"
#include "repro_configs.hpp"

int main(int argc, char **argv) {
    return msgate::run(argc, argv, std::cout, std::cerr, msgate::repro::kConfigs);
}
