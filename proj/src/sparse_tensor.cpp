#include "see/sparse_tensor.hpp"

#include <bit>
#include <cmath>
#include <ostream>
#include <string>

#include "see/errors.hpp"

namespace see {

namespace {

void check_geometry(const Geometry& g) {
  if (g.height < 0 || g.width < 0 || g.channels < 0)
    throw ArgumentError("negative tensor geometry");
}

std::size_t bitmap_word_count(const Geometry& g) { return (g.plane() + 63) / 64; }

std::string coord_str(Coord c) { return "(" + std::to_string(c.y) + "," + std::to_string(c.x) + ")"; }

template <typename T>
double magnitude(T v) {
  return std::abs(static_cast<double>(v));
}

}  // namespace

template <typename T>
SparseTensor<T>::Builder::Builder(Geometry g, std::size_t reserve_sites) : t_(g) {
  t_.sites_.reserve(reserve_sites);
  t_.features_.reserve(reserve_sites * g.channels);
}

template <typename T>
std::span<T> SparseTensor<T>::Builder::push(Coord c) {
  const auto& g = t_.geom_;
  if (c.y < 0 || c.x < 0 || c.y >= g.height || c.x >= g.width)
    throw ContractError("site " + coord_str(c) + " outside tensor geometry");
  if (!t_.sites_.empty() && !(t_.sites_.back() < c))
    throw ContractError("site " + coord_str(c) + " breaks row-major order");
  t_.sites_.push_back(c);
  t_.mark(c);
  const std::size_t base = t_.features_.size();
  t_.features_.resize(base + g.channels, T{});
  return std::span<T>(t_.features_).subspan(base, g.channels);
}

template <typename T>
SparseTensor<T> SparseTensor<T>::Builder::build() && {
  return std::move(t_);
}

template <typename T>
SparseTensor<T>::SparseTensor(Geometry g) : geom_(g) {
  check_geometry(g);
  bitmap_.assign(bitmap_word_count(g), 0);
}

template <typename T>
SparseTensor<T>::SparseTensor(Geometry g, std::vector<Coord> sites, std::vector<T> features)
    : geom_(g), sites_(std::move(sites)), features_(std::move(features)) {
  check_geometry(g);
  if (features_.size() != sites_.size() * static_cast<std::size_t>(g.channels))
    throw ArgumentError("feature count " + std::to_string(features_.size()) + " does not match " +
                        std::to_string(sites_.size()) + " sites x " + std::to_string(g.channels) +
                        " channels");
  bitmap_.assign(bitmap_word_count(g), 0);
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const Coord c = sites_[i];
    if (c.y < 0 || c.x < 0 || c.y >= g.height || c.x >= g.width)
      throw ContractError("site " + coord_str(c) + " outside tensor geometry");
    if (i > 0 && !(sites_[i - 1] < c))
      throw ContractError("site " + coord_str(c) + " breaks row-major order");
    mark(c);
  }
}

template <typename T>
void SparseTensor<T>::mark(Coord c) {
  const std::size_t idx = static_cast<std::size_t>(c.y) * geom_.width + c.x;
  bitmap_[idx / 64] |= std::uint64_t{1} << (idx % 64);
}

template <typename T>
bool SparseTensor<T>::active(int y, int x) const {
  if (y < 0 || x < 0 || y >= geom_.height || x >= geom_.width) return false;
  const std::size_t idx = static_cast<std::size_t>(y) * geom_.width + x;
  return (bitmap_[idx / 64] >> (idx % 64)) & 1u;
}

template <typename T>
std::size_t SparseTensor<T>::popcount() const {
  std::size_t n = 0;
  for (const auto w : bitmap_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

template <typename T>
void SparseTensor<T>::validate() const {
  if (features_.size() != sites_.size() * static_cast<std::size_t>(geom_.channels))
    throw ContractError("feature/site count mismatch");
  if (bitmap_.size() != bitmap_word_count(geom_)) throw ContractError("bitmap size mismatch");
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const Coord c = sites_[i];
    if (c.y < 0 || c.x < 0 || c.y >= geom_.height || c.x >= geom_.width)
      throw ContractError("site " + coord_str(c) + " outside tensor geometry");
    if (i > 0 && !(sites_[i - 1] < c)) throw ContractError("site " + coord_str(c) + " breaks row-major order");
    if (!active(c.y, c.x)) throw ContractError("site " + coord_str(c) + " missing from bitmap");
  }
  if (popcount() != sites_.size()) throw ContractError("bitmap popcount differs from site count");
}

template <typename T>
SparseTensor<T> from_dense(const DenseTensor<T>& dense, double zero_tol) {
  const Geometry g = dense.geometry;
  if (dense.data.size() != g.plane() * g.channels) throw ArgumentError("dense array size does not match geometry");
  typename SparseTensor<T>::Builder b(g);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      bool keep = false;
      for (int c = 0; c < g.channels && !keep; ++c) keep = magnitude(dense.at(y, x, c)) > zero_tol;
      if (!keep) continue;
      auto f = b.push({y, x});
      for (int c = 0; c < g.channels; ++c) f[c] = dense.at(y, x, c);
    }
  }
  return std::move(b).build();
}

template <typename T>
DenseTensor<T> to_dense(const SparseTensor<T>& t) {
  DenseTensor<T> out(t.geometry());
  const int ch = t.geometry().channels;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Coord s = t.sites()[i];
    const auto f = t.feature(i);
    for (int c = 0; c < ch; ++c) out.at(s.y, s.x, c) = f[c];
  }
  return out;
}

template <typename T>
std::vector<Token> tokens(const SparseTensor<T>& t) {
  std::vector<Token> out;
  out.reserve(t.size() + 1);
  for (const Coord s : t.sites()) out.push_back({s.x, s.y, false});
  out.push_back({0, 0, true});
  return out;
}

template <typename T>
void dump_text(const SparseTensor<T>& t, std::ostream& os) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Coord s = t.sites()[i];
    os << s.y << ' ' << s.x;
    for (const T v : t.feature(i)) {
      if constexpr (std::is_same_v<T, float>)
        os << ' ' << v;
      else
        os << ' ' << static_cast<long long>(v);
    }
    os << '\n';
  }
}

#define SEE_INSTANTIATE(T)                                                  \
  template class SparseTensor<T>;                                           \
  template SparseTensor<T> from_dense<T>(const DenseTensor<T>&, double);    \
  template DenseTensor<T> to_dense<T>(const SparseTensor<T>&);              \
  template std::vector<Token> tokens<T>(const SparseTensor<T>&);            \
  template void dump_text<T>(const SparseTensor<T>&, std::ostream&);

SEE_INSTANTIATE(std::int8_t)
SEE_INSTANTIATE(std::int32_t)
SEE_INSTANTIATE(float)

#undef SEE_INSTANTIATE

}  // namespace see
