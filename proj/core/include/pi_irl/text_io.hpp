// Copyright 2026 The pi_irl Authors
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace pi_irl::io {

/// Format version written at the head of every output file.
inline constexpr int kFormatVersion = 1;

/// Decimal with 17 significant digits; parses back to the identical double.
std::string format_double(double value);

/// Minimal streaming writer for compact JSON objects with a fixed key order.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& array(std::span<const double> values);
  /// Inserts an already serialized JSON value.
  JsonWriter& raw(std::string_view json);

  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  void separator();

  std::string out_;
  bool need_comma_ = false;
};

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file then renames, so readers never see partial output.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Throws SchemaVersionMismatch unless version == kFormatVersion.
void check_version(std::int64_t version, std::string_view what);

/// Header line for CSV outputs.
std::string csv_version_line();
/// Strips and validates the CSV version line; returns the remainder.
std::string_view strip_csv_version(std::string_view text, std::string_view what);

}  // namespace pi_irl::io
