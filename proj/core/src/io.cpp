#include "pieceflow/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pieceflow {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line_no,
                          const std::string& what) {
  fail(path, what + " at line " + std::to_string(line_no));
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open file for writing");
  return out;
}

/// Strips a trailing carriage return (CRLF input) in place.
void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string_view> split_fields(std::string_view s) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) fields.push_back(s.substr(start, i - start));
  }
  return fields;
}

/// Drops a '#' comment and surrounding whitespace; returns the payload.
std::string_view strip_comment(std::string_view s) {
  const std::size_t hash = s.find('#');
  if (hash != std::string_view::npos) s = s.substr(0, hash);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view token, const std::filesystem::path& path,
                    std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail_at(path, line_no, "malformed number '" + std::string(token) + "'");
  }
  return value;
}

Vec3 parse_vec3_fields(const std::vector<std::string_view>& fields,
                       const std::filesystem::path& path, std::size_t line_no) {
  if (fields.size() != 3) {
    fail_at(path, line_no,
            "malformed record: expected 3 numeric fields, got " + std::to_string(fields.size()));
  }
  const Vec3 v(parse_double(fields[0], path, line_no), parse_double(fields[1], path, line_no),
               parse_double(fields[2], path, line_no));
  if (!is_finite(v)) fail_at(path, line_no, "non-finite coordinate");
  return v;
}

/// Reads "x y z" records, one per non-comment line.
std::vector<Vec3> load_vec3_records(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<Vec3> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const std::string_view payload = strip_comment(line);
    if (payload.empty()) continue;
    out.push_back(parse_vec3_fields(split_fields(payload), path, line_no));
  }
  return out;
}

void save_vec3_records(const std::vector<Vec3>& records, const std::filesystem::path& path,
                       std::ofstream& out) {
  for (const Vec3& v : records) {
    out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z())
        << '\n';
  }
  if (!out) fail(path, "write failed");
}

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::size_t vertex_property_count = 0;
  int x_col = -1, y_col = -1, z_col = -1;
  // (element name, record count) in declaration order, vertices included
  std::vector<std::pair<std::string, std::size_t>> elements;
};

PlyHeader parse_ply_header(std::ifstream& in, const std::filesystem::path& path,
                           std::size_t& line_no) {
  PlyHeader h;
  std::string line;
  if (!std::getline(in, line)) fail(path, "empty file");
  ++line_no;
  strip_cr(line);
  if (line != "ply") fail_at(path, line_no, "missing 'ply' magic");

  bool format_seen = false;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string_view kw = fields[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (fields.size() < 2 || fields[1] != "ascii") {
        fail_at(path, line_no, "unsupported format (only ascii 1.0 is readable)");
      }
      format_seen = true;
    } else if (kw == "element") {
      if (fields.size() != 3) fail_at(path, line_no, "malformed element declaration");
      std::size_t count = 0;
      const auto [ptr, ec] =
          std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count);
      if (ec != std::errc() || ptr != fields[2].data() + fields[2].size()) {
        fail_at(path, line_no, "malformed element count");
      }
      h.elements.emplace_back(std::string(fields[1]), count);
      in_vertex_element = (fields[1] == "vertex");
      if (in_vertex_element) h.vertex_count = count;
    } else if (kw == "property") {
      if (in_vertex_element) {
        if (fields.size() >= 2 && fields[1] == "list") {
          fail_at(path, line_no, "list properties on vertices are not supported");
        }
        if (fields.size() != 3) fail_at(path, line_no, "malformed property declaration");
        const int col = static_cast<int>(h.vertex_property_count);
        if (fields[2] == "x") h.x_col = col;
        if (fields[2] == "y") h.y_col = col;
        if (fields[2] == "z") h.z_col = col;
        ++h.vertex_property_count;
      }
    } else if (kw == "end_header") {
      if (!format_seen) fail_at(path, line_no, "missing format declaration");
      if (h.vertex_count == 0) fail(path, "no vertex element declared");
      if (h.x_col < 0 || h.y_col < 0 || h.z_col < 0) {
        fail(path, "vertex element lacks x/y/z properties");
      }
      return h;
    } else {
      fail_at(path, line_no, "unrecognized header keyword '" + std::string(kw) + "'");
    }
  }
  fail(path, "unterminated header (no end_header)");
}

std::vector<Vec3> load_ply(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::size_t line_no = 0;
  const PlyHeader h = parse_ply_header(in, path, line_no);

  std::vector<Vec3> points;
  points.reserve(h.vertex_count);
  std::string line;
  for (const auto& [name, count] : h.elements) {
    for (std::size_t r = 0; r < count; ++r) {
      if (!std::getline(in, line)) {
        fail(path, "unexpected end of file: element '" + name + "' is missing records");
      }
      ++line_no;
      strip_cr(line);
      if (name != "vertex") continue;  // skip other elements' records
      const auto fields = split_fields(line);
      if (fields.size() != h.vertex_property_count) {
        fail_at(path, line_no,
                "malformed record: expected " + std::to_string(h.vertex_property_count) +
                    " fields, got " + std::to_string(fields.size()));
      }
      const Vec3 v(parse_double(fields[static_cast<std::size_t>(h.x_col)], path, line_no),
                   parse_double(fields[static_cast<std::size_t>(h.y_col)], path, line_no),
                   parse_double(fields[static_cast<std::size_t>(h.z_col)], path, line_no));
      if (!is_finite(v)) fail_at(path, line_no, "non-finite coordinate");
      points.push_back(v);
    }
  }
  return points;
}

}  // namespace

CloudFormat detect_cloud_format(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string first;
  std::getline(in, first);
  strip_cr(first);
  return first == "ply" ? CloudFormat::ply_ascii : CloudFormat::xyz_text;
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::vector<Vec3> points =
      format == CloudFormat::ply_ascii ? load_ply(path) : load_vec3_records(path);
  if (points.empty()) fail(path, "cloud contains no points");
  return PointCloud(std::move(points));
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format) {
  std::ofstream out = open_output(path);
  if (format == CloudFormat::ply_ascii) {
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  }
  save_vec3_records(cloud.points(), path, out);
}

FlowField load_flow(const std::filesystem::path& path) {
  return FlowField(load_vec3_records(path));
}

void save_flow(const FlowField& flow, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  save_vec3_records(flow.vectors(), path, out);
}

std::vector<std::uint8_t> load_mask(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::uint8_t> mask;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const std::string_view payload = strip_comment(line);
    if (payload.empty()) continue;
    if (payload == "0") {
      mask.push_back(0);
    } else if (payload == "1") {
      mask.push_back(1);
    } else {
      fail_at(path, line_no, "mask value must be 0 or 1, got '" + std::string(payload) + "'");
    }
  }
  return mask;
}

void save_mask(const std::vector<std::uint8_t>& mask, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (const std::uint8_t m : mask) out << (m ? "1\n" : "0\n");
  if (!out) fail(path, "write failed");
}

std::vector<std::uint32_t> load_labels(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const std::string_view payload = strip_comment(line);
    if (payload.empty()) continue;
    std::uint32_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(payload.data(), payload.data() + payload.size(), value);
    if (ec != std::errc() || ptr != payload.data() + payload.size()) {
      fail_at(path, line_no, "malformed region index '" + std::string(payload) + "'");
    }
    labels.push_back(value);
  }
  return labels;
}

void save_labels(const std::vector<std::uint32_t>& labels, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (const std::uint32_t l : labels) out << l << '\n';
  if (!out) fail(path, "write failed");
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

}  // namespace pieceflow
