#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "mmcfit/errors.hpp"

namespace mmc {

struct BlockSlice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

/// Flat parameter vector partitioned into named, contiguous blocks.
class ParamVector {
 public:
  const BlockSlice& add_block(const std::string& name, const Eigen::VectorXd& init) {
    if (find(name) != nullptr) throw ContractError("duplicate parameter block '" + name + "'");
    if (!init.allFinite()) throw ContractError("parameter block '" + name + "' has non-finite values");
    const Eigen::Index offset = values_.size();
    values_.conservativeResize(offset + init.size());
    values_.segment(offset, init.size()) = init;
    blocks_.push_back({name, offset, init.size()});
    return blocks_.back();
  }

  const BlockSlice& block(const std::string& name) const {
    const BlockSlice* b = find(name);
    if (b == nullptr) throw ContractError("unknown parameter block '" + name + "'");
    return *b;
  }

  const BlockSlice* find(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return &b;
    return nullptr;
  }

  Eigen::VectorXd::SegmentReturnType segment(const std::string& name) {
    const BlockSlice& b = block(name);
    return values_.segment(b.offset, b.size);
  }
  Eigen::VectorXd::ConstSegmentReturnType segment(const std::string& name) const {
    const BlockSlice& b = block(name);
    return values_.segment(b.offset, b.size);
  }

  const std::vector<BlockSlice>& blocks() const { return blocks_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  Eigen::VectorXd values_;
  std::vector<BlockSlice> blocks_;
};

}  // namespace mmc
