#pragma once

// On-disk formats: full-precision CSV matrices, P2/P5 portable graymaps,
// dataset directories (data.csv + labels.csv + meta.json) and per-image
// manifests for the ingestion pipeline.

#include "ssmc/group.hpp"
#include "ssmc/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmc {

namespace io {

/// %.17g round-trips doubles exactly.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_full(M(r, c));
    }
    out << '\n';
  }
}

inline Eigen::MatrixXd read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("bad CSV value '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV: " + path.string());
  Eigen::MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows.front().size(); ++c)
      M(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return M;
}

/// P2 (ascii) and P5 (binary, maxval <= 255) portable graymaps.
inline Eigen::MatrixXd read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  auto next_token = [&in, &path]() -> std::string {
    std::string tok;
    while (true) {
      int ch = in.get();
      if (ch == EOF) throw std::runtime_error("truncated PGM header: " + path.string());
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5")
    throw std::runtime_error("unsupported image format '" + magic + "' in " + path.string());
  const Index width = std::stoll(next_token());
  const Index height = std::stoll(next_token());
  const long maxval = std::stol(next_token());
  if (width < 1 || height < 1 || maxval < 1)
    throw std::runtime_error("bad PGM dimensions: " + path.string());
  Eigen::MatrixXd img(height, width);
  if (magic == "P2") {
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c) img(r, c) = std::stod(next_token());
  } else {
    if (maxval > 255) throw std::runtime_error("P5 maxval > 255 unsupported: " + path.string());
    std::vector<unsigned char> buf(static_cast<size_t>(width * height));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw std::runtime_error("truncated PGM payload: " + path.string());
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c)
        img(r, c) = static_cast<double>(buf[static_cast<size_t>(r * width + c)]);
  }
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& img) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "P2\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) {
      long v = std::lround(img(r, c));
      v = std::clamp(v, 0L, 255L);
      out << v << (c + 1 < img.cols() ? ' ' : '\n');
    }
  }
}

}  // namespace io

// ---------------------------------------------------------------------------
// dataset directory format
// ---------------------------------------------------------------------------

/// data.csv (n rows, N columns, full precision), labels.csv (one per line),
/// meta.json (seed, dims, group descriptor).
inline void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_csv_matrix(dir / "data.csv", ds.X);
  {
    std::ofstream out(dir / "labels.csv");
    if (!out) throw std::runtime_error("cannot open labels.csv for writing");
    for (int l : ds.labels) out << l << '\n';
  }
  nlohmann::json meta;
  meta["seed"] = ds.seed;
  meta["n"] = ds.n();
  meta["N"] = ds.N();
  auto dims = nlohmann::json::array();
  for (const auto& b : ds.bases) dims.push_back(b.dim());
  meta["dims"] = dims;
  if (!ds.bases.empty()) meta["group"] = ds.bases.front().rep.descriptor();
  std::ofstream out(dir / "meta.json");
  if (!out) throw std::runtime_error("cannot open meta.json for writing");
  out << meta.dump(2) << '\n';
}

struct LoadedDataset {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  nlohmann::json meta;
};

inline LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  out.X = io::read_csv_matrix(dir / "data.csv");
  std::ifstream in(dir / "labels.csv");
  if (!in) throw std::runtime_error("cannot open labels.csv");
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.labels.push_back(std::stoi(line));
  if (static_cast<Index>(out.labels.size()) != out.X.cols())
    throw std::runtime_error("labels.csv does not match data.csv columns");
  std::ifstream meta(dir / "meta.json");
  if (meta) meta >> out.meta;
  return out;
}

// ---------------------------------------------------------------------------
// manifest format (per-image files)
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path file;
  int label = 0;
};

/// Accepts {"entries": [{"file": ..., "label": ...}, ...]} or a bare array;
/// relative file paths resolve against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  nlohmann::json j;
  in >> j;
  const nlohmann::json& entries = j.is_array() ? j : j.at("entries");
  if (!entries.is_array() || entries.empty())
    throw std::runtime_error("manifest lists no entries: " + manifest_path.string());
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    ManifestEntry m;
    std::filesystem::path f = e.at("file").get<std::string>();
    m.file = f.is_absolute() ? f : base / f;
    m.label = e.at("label").get<int>();
    out.push_back(std::move(m));
  }
  return out;
}

/// Writes every dataset column as its own n1 x n2 CSV image (column-major
/// de-vectorization) plus a manifest.json; the CSV ingestion branch reads this
/// back bit-exactly.
inline std::filesystem::path export_manifest_csv(const SyntheticDataset& ds,
                                                 const std::filesystem::path& dir, Index n1,
                                                 Index n2) {
  if (n1 * n2 != ds.n())
    throw std::invalid_argument("export_manifest_csv: n1*n2 must equal the ambient dimension");
  std::filesystem::create_directories(dir);
  auto entries = nlohmann::json::array();
  for (Index i = 0; i < ds.N(); ++i) {
    Eigen::MatrixXd img =
        Eigen::Map<const Eigen::MatrixXd>(ds.X.col(i).data(), n1, n2);
    char name[32];
    std::snprintf(name, sizeof(name), "point_%04lld.csv", static_cast<long long>(i));
    io::write_csv_matrix(dir / name, img);
    entries.push_back({{"file", name}, {"label", ds.labels[static_cast<size_t>(i)]}});
  }
  const std::filesystem::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot open manifest for writing");
  out << nlohmann::json{{"entries", entries}}.dump(2) << '\n';
  return manifest;
}

}  // namespace ssmc
