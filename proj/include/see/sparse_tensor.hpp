#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace see {

/// Spatial size plus channel count of an activation.
struct Geometry {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Active-site coordinate. Ordering is row-major: (y, x) lexicographic.
struct Coord {
  std::int32_t y = 0;
  std::int32_t x = 0;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

/// Streaming marker for one non-zero pixel; the final token of a stream has end = true.
struct Token {
  std::int32_t x = 0;
  std::int32_t y = 0;
  bool end = false;
  friend bool operator==(const Token&, const Token&) = default;
};

/// Dense H x W x C array, channels innermost.
template <typename T>
struct DenseTensor {
  Geometry geometry;
  std::vector<T> data;

  DenseTensor() = default;
  explicit DenseTensor(Geometry g) : geometry(g), data(g.plane() * g.channels, T{}) {}

  T& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * geometry.width + x) * geometry.channels + c]; }
  const T& at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * geometry.width + x) * geometry.channels + c];
  }
  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;
};

/// Row-major list of active sites with per-site channel vectors and an occupancy bitmap.
///
/// The site list is the software form of the accelerator's token-feature stream: every
/// layer consumes and produces sites left-to-right, top-to-bottom. Instances are immutable
/// once built; use Builder to assemble one site at a time.
template <typename T>
class SparseTensor {
 public:
  class Builder {
   public:
    explicit Builder(Geometry g, std::size_t reserve_sites = 0);
    /// Appends a site with zero-initialised features and returns them for filling.
    /// Throws ContractError when `c` does not follow the previous site in row-major order.
    std::span<T> push(Coord c);
    SparseTensor build() &&;

   private:
    SparseTensor t_;
  };

  SparseTensor() = default;
  explicit SparseTensor(Geometry g);

  /// Validating constructor: sites must be strictly row-major and in range, and
  /// features.size() must equal sites.size() * channels.
  SparseTensor(Geometry g, std::vector<Coord> sites, std::vector<T> features);

  const Geometry& geometry() const { return geom_; }
  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  std::span<const Coord> sites() const { return sites_; }
  std::span<const T> features() const { return features_; }
  std::span<const T> feature(std::size_t i) const {
    return std::span<const T>(features_).subspan(i * geom_.channels, geom_.channels);
  }
  bool active(int y, int x) const;
  std::span<const std::uint64_t> bitmap_words() const { return bitmap_; }
  std::size_t popcount() const;

  /// Re-checks every structural invariant; throws ContractError on the first violation.
  void validate() const;

  friend bool operator==(const SparseTensor&, const SparseTensor&) = default;

 private:
  void mark(Coord c);

  Geometry geom_;
  std::vector<Coord> sites_;
  std::vector<T> features_;
  std::vector<std::uint64_t> bitmap_;
};

/// A site is kept iff some channel's magnitude exceeds zero_tol.
template <typename T>
SparseTensor<T> from_dense(const DenseTensor<T>& dense, double zero_tol = 0.0);

template <typename T>
DenseTensor<T> to_dense(const SparseTensor<T>& t);

template <typename T>
std::vector<Token> tokens(const SparseTensor<T>& t);

template <typename T>
double density(const SparseTensor<T>& t) {
  const auto plane = t.geometry().plane();
  return plane == 0 ? 0.0 : static_cast<double>(t.size()) / static_cast<double>(plane);
}

/// Debug dump: one "y x c0 c1 ..." line per site.
template <typename T>
void dump_text(const SparseTensor<T>& t, std::ostream& os);

/// Returns a tensor of the same sites with each feature converted by `fn`.
template <typename To, typename From, typename Fn>
SparseTensor<To> map_features(const SparseTensor<From>& t, Fn fn) {
  std::vector<To> out;
  out.reserve(t.features().size());
  for (const From v : t.features()) out.push_back(fn(v));
  return SparseTensor<To>(t.geometry(), std::vector<Coord>(t.sites().begin(), t.sites().end()), std::move(out));
}

extern template class SparseTensor<std::int8_t>;
extern template class SparseTensor<std::int32_t>;
extern template class SparseTensor<float>;

}  // namespace see
