#include "wmg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace wmg {

namespace fs = std::filesystem;

namespace {

void append_le(std::string& buffer, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) buffer.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

struct Pending {
  std::string name;
  std::size_t rows, cols;
  std::span<const double> values;
};

}  // namespace

void save_parameters(const ParameterStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create checkpoint directory " + dir.string());

  std::vector<Pending> items;
  for (const auto& e : store.entries()) {
    const std::size_t r = e.value.rows();
    const std::size_t c = e.value.cols();
    items.push_back({e.name, r, c, e.value.values()});
    items.push_back({e.name + kFirstMomentSuffix, r, c, e.first_moment});
    items.push_back({e.name + kSecondMomentSuffix, r, c, e.second_moment});
  }

  std::ostringstream manifest;
  manifest << "wmg-checkpoint\t1\n";
  manifest << "adam_steps\t" << store.adam_steps() << '\n';
  std::string buffer;
  for (const auto& item : items) {
    manifest << item.name << '\t' << item.rows << 'x' << item.cols << '\t' << buffer.size()
             << '\n';
    for (double v : item.values) append_le(buffer, v);
  }

  // Write both files under temporary names, then rename into place.
  const fs::path manifest_tmp = dir / "manifest.txt.tmp";
  const fs::path buffer_tmp = dir / "tensors.bin.tmp";
  {
    std::ofstream out(buffer_tmp, std::ios::binary | std::ios::trunc);
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!out) throw CheckpointError("failed writing " + buffer_tmp.string());
  }
  {
    std::ofstream out(manifest_tmp, std::ios::trunc);
    out << manifest.str();
    if (!out) throw CheckpointError("failed writing " + manifest_tmp.string());
  }
  fs::rename(buffer_tmp, dir / "tensors.bin", ec);
  if (!ec) fs::rename(manifest_tmp, dir / "manifest.txt", ec);
  if (ec) throw CheckpointError("failed to finalize checkpoint in " + dir.string());
}

CheckpointContents read_checkpoint(const fs::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw CheckpointError("missing manifest in " + dir.string());
  std::ifstream data(dir / "tensors.bin", std::ios::binary);
  if (!data) throw CheckpointError("missing tensors.bin in " + dir.string());
  const std::string bytes((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());

  CheckpointContents contents;
  std::string line;
  if (!std::getline(manifest, line) || line != "wmg-checkpoint\t1") {
    throw CheckpointError("unrecognized checkpoint header in " + dir.string());
  }
  if (!std::getline(manifest, line) || line.rfind("adam_steps\t", 0) != 0) {
    throw CheckpointError("missing adam_steps record");
  }
  contents.adam_steps = std::stoull(line.substr(11));

  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    const auto x = line.find('x', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || x == std::string::npos || x > t2) {
      throw CheckpointError("malformed manifest line: " + line);
    }
    CheckpointRecord rec;
    rec.name = line.substr(0, t1);
    rec.rows = std::stoull(line.substr(t1 + 1, x - t1 - 1));
    rec.cols = std::stoull(line.substr(x + 1, t2 - x - 1));
    rec.offset = std::stoull(line.substr(t2 + 1));
    const std::size_t count = rec.rows * rec.cols;
    if (rec.offset + count * 8 > bytes.size()) {
      throw CheckpointError("tensor " + rec.name + " extends past end of tensors.bin");
    }
    rec.values.resize(count);
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data()) + rec.offset;
    for (std::size_t i = 0; i < count; ++i) rec.values[i] = read_le(base + 8 * i);
    contents.records.push_back(std::move(rec));
  }
  return contents;
}

void load_parameters(ParameterStore& store, const fs::path& dir) {
  CheckpointContents contents = read_checkpoint(dir);
  std::unordered_map<std::string, CheckpointRecord*> by_name;
  for (auto& rec : contents.records) by_name[rec.name] = &rec;
  if (contents.records.size() != 3 * store.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(contents.records.size()) +
                          " tensors, model expects " + std::to_string(3 * store.size()));
  }

  auto fetch = [&](const std::string& name, const Tensor& like) -> const CheckpointRecord& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing tensor " + name);
    const CheckpointRecord& rec = *it->second;
    if (rec.rows != like.rows() || rec.cols != like.cols()) {
      throw CheckpointError("shape mismatch for " + name + ": checkpoint [" +
                            std::to_string(rec.rows) + "x" + std::to_string(rec.cols) +
                            "], model " + like.shape_string());
    }
    return rec;
  };

  for (auto& e : store.entries()) {
    const auto& value = fetch(e.name, e.value);
    const auto& m = fetch(e.name + kFirstMomentSuffix, e.value);
    const auto& v = fetch(e.name + kSecondMomentSuffix, e.value);
    std::span<double> dst = e.value.mutable_values();
    std::copy(value.values.begin(), value.values.end(), dst.begin());
    e.first_moment = m.values;
    e.second_moment = v.values;
  }
  store.set_adam_steps(contents.adam_steps);
}

}  // namespace wmg
