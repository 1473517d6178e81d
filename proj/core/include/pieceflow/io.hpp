#pragma once

#include "pieceflow/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pieceflow {

enum class CloudFormat { ply_ascii, xyz_text };

/// Reads the first bytes of the file: a leading "ply" magic selects
/// ply_ascii, anything else xyz_text. Throws std::runtime_error when the
/// file cannot be opened.
CloudFormat detect_cloud_format(const std::filesystem::path& path);

/// Loaders throw std::runtime_error with the offending 1-based line number
/// on malformed records, non-finite values, or unreadable files.
PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format);

/// Flow files: one "fx fy fz" triple per line, full round-trip precision.
FlowField load_flow(const std::filesystem::path& path);
void save_flow(const FlowField& flow, const std::filesystem::path& path);

/// Mask files: one 0/1 per line.
std::vector<std::uint8_t> load_mask(const std::filesystem::path& path);
void save_mask(const std::vector<std::uint8_t>& mask, const std::filesystem::path& path);

/// Region-label files: one non-negative region index per line.
std::vector<std::uint32_t> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<std::uint32_t>& labels, const std::filesystem::path& path);

/// Shortest decimal form that round-trips a double exactly (locale-free).
std::string format_double(double value);

}  // namespace pieceflow
