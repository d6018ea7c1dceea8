#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace netmarl {

/**
 * Mixed-radix index of the (s_M, a_M) tuple for a sorted agent subset M.
 * Agents are digits in ascending id order (the first agent is the most
 * significant), each digit being s_j * |A_j| + a_j. With `with_actions` false
 * only the states are encoded.
 */
class NeighborhoodCodec {
 public:
  NeighborhoodCodec() = default;

  NeighborhoodCodec(std::vector<int> members, std::span<const int> state_sizes, std::span<const int> action_sizes,
                    bool with_actions = true)
      : members_(std::move(members)), with_actions_(with_actions) {
    radix_.reserve(members_.size());
    size_ = 1;
    for (int j : members_) {
      const auto sj = static_cast<std::uint64_t>(state_sizes[static_cast<std::size_t>(j)]);
      const auto aj = with_actions ? static_cast<std::uint64_t>(action_sizes[static_cast<std::size_t>(j)]) : 1U;
      const std::uint64_t r = sj * aj;
      if (r == 0) throw std::invalid_argument("NeighborhoodCodec: empty local space");
      if (size_ > std::numeric_limits<std::uint64_t>::max() / r)
        throw std::overflow_error("NeighborhoodCodec: neighbourhood space exceeds 64-bit index");
      size_ *= r;
      radix_.push_back(r);
      action_size_.push_back(static_cast<int>(aj));
    }
  }

  const std::vector<int>& members() const noexcept { return members_; }
  std::uint64_t size() const noexcept { return size_; }
  bool with_actions() const noexcept { return with_actions_; }

  /// Encodes from global state/action vectors (reads only member coordinates).
  std::uint64_t encode(std::span<const int> s, std::span<const int> a) const noexcept {
    std::uint64_t code = 0;
    for (std::size_t k = 0; k < members_.size(); ++k) {
      const auto j = static_cast<std::size_t>(members_[k]);
      const std::uint64_t digit = with_actions_ ? static_cast<std::uint64_t>(s[j]) * action_size_[k] + a[j]
                                                : static_cast<std::uint64_t>(s[j]);
      code = code * radix_[k] + digit;
    }
    return code;
  }

  std::uint64_t encode_states(std::span<const int> s) const noexcept { return encode(s, {}); }

  /// Writes member coordinates of `code` into the global vectors s and a.
  void decode(std::uint64_t code, std::span<int> s, std::span<int> a) const noexcept {
    for (std::size_t k = members_.size(); k-- > 0;) {
      const std::uint64_t digit = code % radix_[k];
      code /= radix_[k];
      const auto j = static_cast<std::size_t>(members_[k]);
      if (with_actions_) {
        s[j] = static_cast<int>(digit / static_cast<std::uint64_t>(action_size_[k]));
        a[j] = static_cast<int>(digit % static_cast<std::uint64_t>(action_size_[k]));
      } else {
        s[j] = static_cast<int>(digit);
      }
    }
  }

 private:
  std::vector<int> members_;
  std::vector<std::uint64_t> radix_;
  std::vector<int> action_size_;
  std::uint64_t size_ = 1;
  bool with_actions_ = true;
};

/// Enumerates every global configuration of a product space in mixed-radix order (last agent fastest).
class ProductIndexer {
 public:
  explicit ProductIndexer(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    count_ = 1;
    for (int s : sizes_) {
      if (s <= 0) throw std::invalid_argument("ProductIndexer: empty factor");
      if (count_ > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(s))
        throw std::overflow_error("ProductIndexer: product space too large");
      count_ *= static_cast<std::uint64_t>(s);
    }
  }

  std::uint64_t count() const noexcept { return count_; }
  const std::vector<int>& sizes() const noexcept { return sizes_; }

  std::uint64_t index(std::span<const int> values) const noexcept {
    std::uint64_t idx = 0;
    for (std::size_t k = 0; k < sizes_.size(); ++k) idx = idx * static_cast<std::uint64_t>(sizes_[k]) + values[k];
    return idx;
  }

  void values(std::uint64_t idx, std::span<int> out) const noexcept {
    for (std::size_t k = sizes_.size(); k-- > 0;) {
      out[k] = static_cast<int>(idx % static_cast<std::uint64_t>(sizes_[k]));
      idx /= static_cast<std::uint64_t>(sizes_[k]);
    }
  }

  std::vector<int> values(std::uint64_t idx) const {
    std::vector<int> out(sizes_.size());
    values(idx, out);
    return out;
  }

 private:
  std::vector<int> sizes_;
  std::uint64_t count_ = 1;
};

}  // namespace netmarl
