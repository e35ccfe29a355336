#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "ntg/road_graph.hpp"

namespace ntg::binio {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <class T>
void put(std::string &out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data, const char *what) : data_(data), what_(what) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError(std::string(what_) + ": truncated payload");
  }
  std::string_view data_;
  const char *what_;
  std::size_t pos_ = 0;
};

}  // namespace ntg::binio
