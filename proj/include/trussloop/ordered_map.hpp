#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trussloop {

/// Insertion-ordered associative container.
///
/// Node, member and area maps must keep the order in which they were written
/// (prompts echo them back in that order), and they hold at most a few dozen
/// entries, so a vector with linear lookup is all that is needed.
template <typename Key, typename Value>
class OrderedMap {
 public:
  using value_type = std::pair<Key, Value>;
  using container_type = std::vector<value_type>;
  using iterator = typename container_type::iterator;
  using const_iterator = typename container_type::const_iterator;

  OrderedMap() = default;
  OrderedMap(std::initializer_list<value_type> init) {
    for (const auto& [key, value] : init) insert_or_assign(key, value);
  }

  /// An existing key keeps its position and takes the new value.
  Value& insert_or_assign(const Key& key, Value value) {
    if (Value* existing = find(key)) {
      *existing = std::move(value);
      return *existing;
    }
    items_.emplace_back(key, std::move(value));
    return items_.back().second;
  }

  [[nodiscard]] const Value* find(const Key& key) const {
    for (const auto& item : items_) {
      if (item.first == key) return &item.second;
    }
    return nullptr;
  }

  [[nodiscard]] Value* find(const Key& key) {
    for (auto& item : items_) {
      if (item.first == key) return &item.second;
    }
    return nullptr;
  }

  [[nodiscard]] bool contains(const Key& key) const { return find(key) != nullptr; }

  [[nodiscard]] const Value& at(const Key& key) const {
    if (const Value* value = find(key)) return *value;
    throw std::out_of_range("OrderedMap::at: missing key");
  }

  [[nodiscard]] Value& at(const Key& key) {
    if (Value* value = find(key)) return *value;
    throw std::out_of_range("OrderedMap::at: missing key");
  }

  bool erase(const Key& key) {
    for (auto it = items_.begin(); it != items_.end(); ++it) {
      if (it->first == key) {
        items_.erase(it);
        return true;
      }
    }
    return false;
  }

  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
  [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
  void clear() noexcept { items_.clear(); }

  iterator begin() noexcept { return items_.begin(); }
  iterator end() noexcept { return items_.end(); }
  const_iterator begin() const noexcept { return items_.begin(); }
  const_iterator end() const noexcept { return items_.end(); }

  [[nodiscard]] const value_type& entry(std::size_t index) const { return items_.at(index); }

  friend bool operator==(const OrderedMap& lhs, const OrderedMap& rhs) = default;

 private:
  container_type items_;
};

}  // namespace trussloop
