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

// Minimal RFC-4180 reader and writer.

#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "surgtime/errors.hpp"

namespace surgtime::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line_no = 0;  // line on which the record starts
};

/// Reads one record, honouring quoted fields that span lines. Returns
/// nullopt at end of stream. Blank lines are skipped.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::optional<Record> next() {
    std::string line;
    while (true) {
      if (!std::getline(in_, line)) return std::nullopt;
      ++line_;
      strip_cr(line);
      if (line_ == 1) strip_bom(line);
      if (!line.empty()) break;
    }
    Record rec;
    rec.line_no = line_;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i == line.size()) {
        if (!quoted) break;
        std::string more;
        if (!std::getline(in_, more)) throw MalformedRow("unterminated quoted field", rec.line_no);
        ++line_;
        strip_cr(more);
        field += '\n';
        line = std::move(more);
        i = 0;
        continue;
      }
      const char c = line[i++];
      if (quoted) {
        if (c == '"') {
          if (i < line.size() && line[i] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    rec.fields.push_back(std::move(field));
    return rec;
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  static void strip_bom(std::string& s) {
    if (s.rfind("\xEF\xBB\xBF", 0) == 0) s.erase(0, 3);
  }

  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Writes one CRLF-free record terminated by '\n'.
inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace surgtime::csv
