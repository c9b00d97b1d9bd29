#include "sgrid/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sgrid {

namespace {

using json = nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

struct ParsedDecimal {
  uint64_t int_part = 0;
  std::string frac_digits;  // trailing zeros trimmed
};

ParsedDecimal parse_decimal(const std::string& s, size_t row) {
  ParsedDecimal out;
  size_t i = 0;
  if (s.empty()) throw InputError("row " + std::to_string(row) + ": empty numeric field");
  bool any_digit = false;
  for (; i < s.size() && s[i] != '.'; ++i) {
    if (s[i] < '0' || s[i] > '9')
      throw InputError("row " + std::to_string(row) + ": malformed number '" + s + "'");
    uint64_t digit = s[i] - '0';
    if (out.int_part > (std::numeric_limits<uint64_t>::max() - digit) / 10)
      throw InputError("row " + std::to_string(row) + ": value overflows 64 bits");
    out.int_part = out.int_part * 10 + digit;
    any_digit = true;
  }
  if (i < s.size()) {  // fraction
    ++i;
    for (; i < s.size(); ++i) {
      if (s[i] < '0' || s[i] > '9')
        throw InputError("row " + std::to_string(row) + ": malformed number '" + s + "'");
      out.frac_digits += s[i];
      any_digit = true;
    }
    while (!out.frac_digits.empty() && out.frac_digits.back() == '0') out.frac_digits.pop_back();
  }
  if (!any_digit) throw InputError("row " + std::to_string(row) + ": malformed number '" + s + "'");
  return out;
}

uint64_t scale_up(uint64_t v, int32_t exp, size_t row) {
  for (int32_t k = 0; k < exp; ++k) {
    if (v > std::numeric_limits<uint64_t>::max() / 10)
      throw InputError("row " + std::to_string(row) + ": value overflows 64 bits after scaling");
    v *= 10;
  }
  return v;
}

template <typename T>
void put_le(std::string& buf, T v) {
  static_assert(std::is_integral_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i)
    buf += static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw InputError("dataset file: truncated header");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

Dataset ingest_csv(const std::string& path, const std::vector<ColumnSchema>& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty file: " + path);
  auto header = split_csv_line(line);
  if (header.size() != schema.size())
    throw InputError("header has " + std::to_string(header.size()) + " columns, schema expects " +
                     std::to_string(schema.size()));

  const uint32_t d = schema.size();
  std::vector<std::vector<ParsedDecimal>> decimals(d);
  std::vector<std::vector<uint64_t>> ints(d);
  std::vector<std::vector<std::string>> strings(d);
  std::vector<int32_t> exponents(d, 0);

  size_t row = 1;  // header was row 0
  uint64_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      ++row;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != d)
      throw InputError("row " + std::to_string(row) + ": expected " + std::to_string(d) +
                       " fields, got " + std::to_string(fields.size()));
    for (uint32_t c = 0; c < d; ++c) {
      switch (schema[c].kind) {
        case ColumnKind::Integer: {
          auto p = parse_decimal(fields[c], row);
          if (!p.frac_digits.empty())
            throw InputError("row " + std::to_string(row) + ": fractional value in integer column");
          ints[c].push_back(p.int_part);
          break;
        }
        case ColumnKind::Decimal: {
          auto p = parse_decimal(fields[c], row);
          exponents[c] = std::max(exponents[c], static_cast<int32_t>(p.frac_digits.size()));
          decimals[c].push_back(std::move(p));
          break;
        }
        case ColumnKind::String:
          strings[c].push_back(fields[c]);
          break;
      }
    }
    ++n;
    ++row;
  }
  if (n == 0) throw InputError("no data rows in " + path);

  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.columns.resize(d);
  ds.scale_exponents.assign(d, 0);
  ds.dicts.resize(d);
  for (uint32_t c = 0; c < d; ++c) {
    auto& col = ds.columns[c];
    col.reserve(n);
    switch (schema[c].kind) {
      case ColumnKind::Integer:
        col = std::move(ints[c]);
        break;
      case ColumnKind::Decimal: {
        ds.scale_exponents[c] = exponents[c];
        for (uint64_t r = 0; r < n; ++r) {
          const auto& p = decimals[c][r];
          uint64_t v = scale_up(p.int_part, exponents[c], r + 1);
          uint64_t frac = 0;
          for (char ch : p.frac_digits) frac = frac * 10 + (ch - '0');
          frac = scale_up(frac, exponents[c] - static_cast<int32_t>(p.frac_digits.size()), r + 1);
          if (v > std::numeric_limits<uint64_t>::max() - frac)
            throw InputError("row " + std::to_string(r + 1) + ": value overflows 64 bits after scaling");
          col.push_back(v + frac);
        }
        break;
      }
      case ColumnKind::String: {
        Dictionary dict;
        for (const auto& s : strings[c]) col.push_back(dict.encode(s));
        ds.dicts[c] = std::move(dict);
        break;
      }
    }
  }
  ds.refresh_domains();
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path + " for writing");
  std::string header = "SGDS";
  put_le<uint32_t>(header, 1);
  put_le<uint64_t>(header, ds.n);
  put_le<uint32_t>(header, ds.d);
  for (uint32_t c = 0; c < ds.d; ++c) {
    put_le<uint64_t>(header, c < ds.domains.size() ? ds.domains[c] : 0);
    put_le<int32_t>(header, c < ds.scale_exponents.size() ? ds.scale_exponents[c] : 0);
  }
  out.write(header.data(), header.size());
  for (uint32_t c = 0; c < ds.d; ++c) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(ds.columns[c].data()), ds.n * sizeof(uint64_t));
    } else {
      std::string buf;
      buf.reserve(ds.n * 8);
      for (uint64_t v : ds.columns[c]) put_le<uint64_t>(buf, v);
      out.write(buf.data(), buf.size());
    }
  }
  if (!out) throw InputError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SGDS", 4) != 0)
    throw InputError(path + ": not a dataset file (bad magic)");
  uint32_t version = get_le<uint32_t>(in);
  if (version != 1) throw InputError(path + ": unsupported version " + std::to_string(version));
  Dataset ds;
  ds.n = get_le<uint64_t>(in);
  ds.d = get_le<uint32_t>(in);
  ds.domains.resize(ds.d);
  ds.scale_exponents.resize(ds.d);
  ds.dicts.resize(ds.d);
  for (uint32_t c = 0; c < ds.d; ++c) {
    ds.domains[c] = get_le<uint64_t>(in);
    ds.scale_exponents[c] = get_le<int32_t>(in);
  }
  ds.columns.resize(ds.d);
  for (uint32_t c = 0; c < ds.d; ++c) {
    ds.columns[c].resize(ds.n);
    if constexpr (std::endian::native == std::endian::little) {
      in.read(reinterpret_cast<char*>(ds.columns[c].data()), ds.n * sizeof(uint64_t));
      if (!in) throw InputError(path + ": truncated payload");
    } else {
      for (uint64_t i = 0; i < ds.n; ++i) ds.columns[c][i] = get_le<uint64_t>(in);
    }
  }
  ds.validate();
  return ds;
}

void write_workload(const Workload& w, const std::string& path) {
  json arr = json::array();
  for (const auto& q : w.queries) {
    json jq;
    if (q.type_hint >= 0) jq["type_hint"] = q.type_hint;
    json preds = json::array();
    for (const auto& p : q.predicates) preds.push_back({{"dim", p.dim}, {"lo", p.lo}, {"hi", p.hi}});
    jq["predicates"] = std::move(preds);
    arr.push_back(std::move(jq));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << arr.dump(2) << "\n";
}

Workload read_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!arr.is_array()) throw InputError(path + ": workload JSON must be an array");
  Workload w;
  for (const auto& jq : arr) {
    Query q;
    q.type_hint = jq.value("type_hint", -1);
    for (const auto& jp : jq.at("predicates")) {
      RangePredicate p;
      p.dim = jp.at("dim").get<uint32_t>();
      p.lo = jp.at("lo").get<uint64_t>();
      p.hi = jp.at("hi").get<uint64_t>();
      q.predicates.push_back(p);
    }
    q.normalize();
    w.queries.push_back(std::move(q));
  }
  return w;
}

}  // namespace sgrid
