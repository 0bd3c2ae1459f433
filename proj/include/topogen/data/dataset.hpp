#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "topogen/core/hash.hpp"
#include "topogen/core/io.hpp"
#include "topogen/core/rng.hpp"
#include "topogen/data/params.hpp"
#include "topogen/simp/optimize.hpp"

namespace topogen::data {

using nlohmann::json;

struct Sample {
  Grid image;
  DesignParams label;
  std::string id;
  bool augmented = false;
};

// Labeled collection plus the provenance needed to regenerate it. Images are
// stored float32-quantized so in-memory content, the on-disk container, and
// the content hash all agree bit-for-bit.
struct Dataset {
  std::vector<Sample> samples;
  int nelx = 0;
  int nely = 0;
  ParamBounds bounds;
  std::uint64_t seed = 0;
  int failed_runs = 0;

  std::string content_hash() const {
    Sha256 h;
    std::string buf;
    append_u32(buf, static_cast<std::uint32_t>(samples.size()));
    h.update(buf);
    for (const auto& s : samples) {
      buf.clear();
      buf += s.id;
      buf.push_back('\0');
      append_f64(buf, s.label.vol_frac);
      append_f64(buf, s.label.penal);
      append_f64(buf, s.label.r_min);
      buf.push_back(s.augmented ? 1 : 0);
      h.update(buf);
      h.update(encode_topo(s.image));
    }
    return h.hex_digest();
  }
};

// Round every value through float32; generation and augmentation apply this
// so serialization is lossless afterwards.
inline void quantize_f32(Grid& g) {
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(static_cast<float>(g[i]));
}

inline std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", index);
  return buf;
}

// Run the optimizer once per grid triple. Failed runs are skipped and
// counted. Generation is parallel across triples; results are ordered by
// grid index, so the content is independent of the job count.
inline Dataset generate_dataset(const std::vector<DesignParams>& grid, const simp::Mesh& mesh,
                                const simp::BoundaryCondition& bc,
                                const simp::SimpSettings& base = {}, int jobs = 0) {
  if (grid.empty()) throw ParameterError("generate_dataset: empty parameter grid");
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));

  std::vector<Sample> slots(grid.size());
  std::vector<char> ok(grid.size(), 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      simp::SimpSettings s = base;
      s.vol_frac = grid[i].vol_frac;
      s.penal = grid[i].penal;
      s.r_min = grid[i].r_min;
      try {
        simp::OptimizationResult r = simp::optimize(s, mesh, bc);
        Sample sample;
        sample.image = std::move(r.density);
        quantize_f32(sample.image);
        sample.label = grid[i];
        sample.id = sample_id(static_cast<int>(i));
        slots[i] = std::move(sample);
        ok[i] = 1;
      } catch (const Error&) {
        ok[i] = 0;
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Dataset ds;
  ds.nelx = mesh.nelx;
  ds.nely = mesh.nely;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (ok[i]) {
      ds.samples.push_back(std::move(slots[i]));
    } else {
      ++ds.failed_runs;
    }
  }
  return ds;
}

// Appends one noisy copy per original: ceil(noise_fraction * N) distinct
// pixels perturbed by uniform(-noise_magnitude, +noise_magnitude), clipped
// to [0, 1]. Labels are preserved; ids gain an "-aug" suffix.
inline Dataset augment(const Dataset& input, double noise_fraction = 0.01,
                       double noise_magnitude = 0.2, std::uint64_t seed = 0) {
  if (!(noise_fraction > 0.0 && noise_fraction <= 1.0))
    throw ParameterError("augment: noise_fraction must be in (0, 1]");
  if (!std::isfinite(noise_magnitude) || noise_magnitude < 0.0)
    throw ParameterError("augment: noise_magnitude must be finite and >= 0");

  Dataset out = input;
  out.seed = seed;
  Rng rng(Rng::derive(seed, 0x617567));  // one sequential stream over all samples
  for (const Sample& orig : input.samples) {
    Sample copy = orig;
    copy.id += "-aug";
    copy.augmented = true;
    const std::size_t n = copy.image.size();
    const std::size_t k =
        std::min<std::size_t>(n, static_cast<std::size_t>(
                                     std::ceil(noise_fraction * static_cast<double>(n))));
    // partial Fisher-Yates for k distinct pixel indices
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
      double v = copy.image[idx[i]] + rng.uniform(-noise_magnitude, noise_magnitude);
      copy.image[idx[i]] = std::min(1.0, std::max(0.0, v));
    }
    quantize_f32(copy.image);
    out.samples.push_back(std::move(copy));
  }
  return out;
}

// ---- on-disk layout: manifest.jsonl + images/<id>.topo ----

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  std::ostringstream manifest;
  json header;
  header["type"] = "header";
  header["nelx"] = ds.nelx;
  header["nely"] = ds.nely;
  header["bounds"] = ds.bounds;
  header["seed"] = ds.seed;
  header["failed_runs"] = ds.failed_runs;
  header["sample_count"] = ds.samples.size();
  header["content_hash"] = ds.content_hash();
  manifest << header.dump() << '\n';
  for (const auto& s : ds.samples) {
    const std::string rel = "images/" + s.id + ".topo";
    json rec;
    rec["id"] = s.id;
    rec["vol_frac"] = s.label.vol_frac;
    rec["penal"] = s.label.penal;
    rec["r_min"] = s.label.r_min;
    rec["augmented"] = s.augmented;
    rec["image"] = rel;
    manifest << rec.dump() << '\n';
    write_topo(dir / rel, s.image);
  }
  write_file(dir / "manifest.jsonl", manifest.str());
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / "manifest.jsonl");
  std::istringstream lines(text);
  std::string line;
  if (!std::getline(lines, line)) throw IntegrityError("dataset: empty manifest");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("dataset: bad manifest header: ") + e.what());
  }
  if (header.value("type", "") != "header") throw IntegrityError("dataset: missing header record");

  Dataset ds;
  ds.nelx = header.at("nelx");
  ds.nely = header.at("nely");
  ds.bounds = header.at("bounds").get<ParamBounds>();
  ds.seed = header.at("seed");
  ds.failed_runs = header.at("failed_runs");

  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw IntegrityError(std::string("dataset: bad manifest record: ") + e.what());
    }
    Sample s;
    s.id = rec.at("id");
    s.label.vol_frac = rec.at("vol_frac");
    s.label.penal = rec.at("penal");
    s.label.r_min = rec.at("r_min");
    s.augmented = rec.at("augmented");
    s.image = read_topo(dir / rec.at("image").get<std::string>());
    ds.samples.push_back(std::move(s));
  }

  if (ds.samples.size() != header.at("sample_count").get<std::size_t>())
    throw IntegrityError("dataset: manifest count does not match stored samples");
  if (ds.content_hash() != header.at("content_hash").get<std::string>())
    throw IntegrityError("dataset: content hash mismatch");
  return ds;
}

// Deterministic train/validation split. Augmented copies always land in the
// same fold as their originals (ids share the base prefix), so noisy twins
// cannot leak across folds.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline SplitIndices split_dataset(const Dataset& ds, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw ParameterError("split_dataset: val_fraction must be in [0, 1)");
  auto base_id = [](const std::string& id) {
    const auto pos = id.rfind("-aug");
    return pos == std::string::npos ? id : id.substr(0, pos);
  };
  std::vector<std::string> groups;
  for (const auto& s : ds.samples) {
    const std::string b = base_id(s.id);
    if (std::find(groups.begin(), groups.end(), b) == groups.end()) groups.push_back(b);
  }
  Rng rng(Rng::derive(seed, 0x73706c69));
  rng.shuffle(groups.begin(), groups.end());
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(groups.size())));
  std::vector<std::string> val_groups(groups.begin(), groups.begin() + n_val);

  SplitIndices out;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const std::string b = base_id(ds.samples[i].id);
    const bool in_val = std::find(val_groups.begin(), val_groups.end(), b) != val_groups.end();
    (in_val ? out.val : out.train).push_back(i);
  }
  return out;
}

}  // namespace topogen::data
