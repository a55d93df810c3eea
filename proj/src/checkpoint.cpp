#include "crossroads/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crossroads::checkpoint {

namespace {

constexpr const char* kMagic = "crossroads-checkpoint v1";

void write_double_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t swapped = 0;
    for (int i = 0; i < 8; ++i) {
      swapped |= ((bits >> (i * 8)) & 0xffULL) << ((7 - i) * 8);
    }
    bits = swapped;
  }
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.write(buf, 8);
}

double read_double_le(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t swapped = 0;
    for (int i = 0; i < 8; ++i) {
      swapped |= ((bits >> (i * 8)) & 0xffULL) << ((7 - i) * 8);
    }
    bits = swapped;
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw std::runtime_error("checkpoint has no tensor named " + name);
}

const std::string* Checkpoint::header_value(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return &v;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << kMagic << "\n";
  out << "precision: float64\n";
  for (const auto& [k, v] : ckpt.header) out << k << ": " << v << "\n";
  out << "tensors: " << ckpt.tensors.size() << "\n";
  for (const auto& t : ckpt.tensors) {
    out << t.name << " " << t.dims.size();
    long expect = 1;
    for (long d : t.dims) {
      out << " " << d;
      expect *= d;
    }
    out << "\n";
    if (expect != static_cast<long>(t.data.size())) {
      throw std::runtime_error("tensor " + t.name + " dims/data mismatch");
    }
    for (double v : t.data) write_double_le(out, v);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error("not a crossroads checkpoint: " + path);
  }

  Checkpoint ckpt;
  long n_tensors = -1;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) {
      throw std::runtime_error("malformed header line: " + line);
    }
    const std::string key = line.substr(0, colon);
    const std::string value = line.substr(colon + 2);
    if (key == "tensors") {
      n_tensors = std::stol(value);
      break;
    }
    if (key != "precision") ckpt.header.emplace_back(key, value);
  }
  if (n_tensors < 0) throw std::runtime_error("missing tensor count: " + path);

  for (long i = 0; i < n_tensors; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("truncated checkpoint: " + path);
    }
    std::istringstream ss(line);
    NamedTensor t;
    int rank = 0;
    ss >> t.name >> rank;
    long count = 1;
    for (int r = 0; r < rank; ++r) {
      long d = 0;
      ss >> d;
      t.dims.push_back(d);
      count *= d;
    }
    if (!ss || count < 0) {
      throw std::runtime_error("malformed tensor record: " + line);
    }
    t.data.resize(count);
    for (long j = 0; j < count; ++j) t.data[j] = read_double_le(in);
    if (!in) throw std::runtime_error("truncated tensor payload: " + t.name);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace crossroads::checkpoint
