#pragma once

#include <string>
#include <utility>
#include <vector>

namespace crossroads::checkpoint {

struct NamedTensor {
  std::string name;
  std::vector<long> dims;
  std::vector<double> data;  // row-major
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const;
  const std::string* header_value(const std::string& key) const;
};

// Text header of `key: value` lines, then per-tensor records: a text line
// `name rank dims...` followed by the little-endian IEEE-754 payload.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace crossroads::checkpoint
