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

#include "pi_irl/text_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pi_irl/common.hpp"

namespace pi_irl::io {

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    // JSON has no inf/nan; NaN marks "not available" in logs and reports.
    if (std::isnan(value)) return "null";
    return value > 0 ? "1e999" : "-1e999";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void JsonWriter::separator() {
  if (need_comma_) out_.push_back(',');
  need_comma_ = false;
}

JsonWriter& JsonWriter::begin_object() {
  separator();
  out_.push_back('{');
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_.push_back('}');
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  separator();
  out_.push_back('[');
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_.push_back(']');
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::raw(std::string_view json) {
  separator();
  out_.append(json);
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view name) {
  separator();
  value(name);
  out_.push_back(':');
  need_comma_ = false;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  separator();
  out_ += format_double(v);
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
  separator();
  out_ += std::to_string(v);
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  separator();
  out_ += std::to_string(v);
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  separator();
  out_ += v ? "true" : "false";
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  separator();
  out_.push_back('"');
  for (char c : v) {
    if (c == '"' || c == '\\') out_.push_back('\\');
    out_.push_back(c);
  }
  out_.push_back('"');
  need_comma_ = true;
  return *this;
}

JsonWriter& JsonWriter::array(std::span<const double> values) {
  begin_array();
  for (double v : values) value(v);
  return end_array();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::MissingInput, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void check_version(std::int64_t version, std::string_view what) {
  if (version != kFormatVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch,
                std::string(what) + " has version " + std::to_string(version) + ", expected " +
                    std::to_string(kFormatVersion));
  }
}

std::string csv_version_line() { return "# version=" + std::to_string(kFormatVersion) + "\n"; }

std::string_view strip_csv_version(std::string_view text, std::string_view what) {
  constexpr std::string_view kPrefix = "# version=";
  if (!text.starts_with(kPrefix)) {
    throw Error(ErrorCode::SchemaVersionMismatch, std::string(what) + " lacks a version line");
  }
  const auto eol = text.find('\n');
  const auto number = text.substr(kPrefix.size(), eol - kPrefix.size());
  std::int64_t version = -1;
  try {
    version = std::stoll(std::string(number));
  } catch (const std::exception&) {
    throw Error(ErrorCode::SchemaVersionMismatch, std::string(what) + " has a malformed version");
  }
  check_version(version, what);
  return eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
}

}  // namespace pi_irl::io
