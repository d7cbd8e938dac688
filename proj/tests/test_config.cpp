// Copyright 2026 The covgs Authors
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

#include <doctest.h>

#include "covgs/config.hpp"
#include "covgs/errors.hpp"

using namespace covgs;

namespace {

ErrorKind kind_of(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("accepted: " << text);
  return ErrorKind::kData;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults round trip") {
  const RunConfig d;
  CHECK_NOTHROW(d.validate());
  const std::string text = dump_run_config(d);
  const RunConfig back = parse_run_config(text);
  CHECK(dump_run_config(back) == text);
  CHECK(back.seed == 1);
  CHECK(back.enumeration.max_instances == 20000);
  CHECK(back.enumeration.cross_segment_only);
  CHECK(back.train.beta == 0.9);
  CHECK(back.servo.ll_scale == 100.0);
}

TEST_CASE("partial documents override defaults") {
  const RunConfig c = parse_run_config(R"({"seed": 42, "train": {"outer_iters": 7, "ctypes": ["PP"]},
                                            "servo": {"robot": "arm", "deltas": [0.1, 0.1, 0.1, 0.1]}})");
  CHECK(c.seed == 42);
  CHECK(c.train.outer_iters == 7);
  CHECK(c.train_ctypes == std::vector<ConstraintType>{ConstraintType::kPointToPoint});
  CHECK(c.robot == "arm");
  CHECK(c.servo.deltas.size() == 4);
  CHECK(c.sim.videos_per_category == 10);
  CHECK(parse_run_config("{}").seed == 1);
}

TEST_CASE("invalid documents") {
  CHECK(kind_of("{") == ErrorKind::kConfig);
  CHECK(kind_of("[]") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"sede": 1})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"train": {"alpah": 1}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"train": {"beta": 1.0}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"train": {"alpha": "high"}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"train": {"ctypes": ["XX"]}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"sim": {"dropout": 1.5}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"sim": {"train_categories": 1}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"servo": {"robot": "hexapod"}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"servo": {"gain": -1}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"selection": {"bridge_frames": -1}})") == ErrorKind::kConfig);
  CHECK(exit_code_for(ErrorKind::kConfig) == kExitConfig);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), Error);
}

}  // TEST_SUITE
