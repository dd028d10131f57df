#include "gtring/index_tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "gtring/counter_rng.hpp"
#include "gtring/errors.hpp"

namespace gtring {

static_assert(std::endian::native == std::endian::little,
              "GSigma storage doubles as the little-endian wire format");
static_assert(GSigma::kHeaderBytes % sizeof(Complex) == 0);

namespace {

void put_u32(std::byte* dst, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) dst[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFFu);
}

void put_u64(std::byte* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFFu);
}

std::uint32_t get_u32(const std::byte* src) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(src[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::byte* src) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(src[i]) << (8 * i);
  return v;
}

// a * b without std::complex's NaN recovery path; keeps the kernel's
// operation order explicit.
inline Complex mul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace

CombinedIndexSpace::CombinedIndexSpace(std::uint32_t n_k, std::uint32_t n_w) : n_k_(n_k), n_w_(n_w) {
  if (n_k == 0 || n_w == 0) {
    throw ConfigError("index space needs n_k >= 1 and n_w >= 1");
  }
  if (static_cast<std::uint64_t>(n_k) * n_w > 0xFFFFu) {
    throw ConfigError("combined index space too large (N must fit in 16 bits)");
  }
}

std::uint32_t index_diff(std::uint32_t a, std::uint32_t b, const CombinedIndexSpace& space) {
  const std::uint32_t n = space.size();
  if (a >= n || b >= n) {
    throw DomainError("combined index out of range: (" + std::to_string(a) + ", " + std::to_string(b) +
                      ") with N=" + std::to_string(n));
  }
  return a >= b ? a - b : a + n - b;
}

// ---------------------------------------------------------------- GSigma

GSigma::GSigma(const CombinedIndexSpace& space, AllocationObserver* observer)
    : space_(space), observer_(observer), storage_(kHeaderSlots + 2 * std::size_t{space.size()} * space.size()) {
  if (observer_ != nullptr) observer_->on_gsigma_allocation(matrix_bytes());
  write_header_dims();
}

GSigma::GSigma(const GSigma& other) : space_(other.space_), observer_(other.observer_), storage_(other.storage_) {
  if (observer_ != nullptr) observer_->on_gsigma_allocation(matrix_bytes());
}

GSigma& GSigma::operator=(const GSigma& other) {
  if (this == &other) return *this;
  const bool grows = storage_.capacity() < other.storage_.size();
  space_ = other.space_;
  observer_ = other.observer_;
  storage_ = other.storage_;
  if (grows && observer_ != nullptr) observer_->on_gsigma_allocation(matrix_bytes());
  return *this;
}

void swap(GSigma& a, GSigma& b) noexcept {
  using std::swap;
  swap(a.space_, b.space_);
  swap(a.observer_, b.observer_);
  swap(a.storage_, b.storage_);
}

void GSigma::write_header_dims() {
  std::byte* h = reinterpret_cast<std::byte*>(storage_.data());
  std::memset(h, 0, kHeaderBytes);
  put_u32(h + 0, kMagic);
  put_u32(h + 4, space_.n_k());
  put_u32(h + 8, space_.n_w());
  put_u64(h + 40, matrix_bytes());
}

Origin GSigma::origin() const {
  const std::byte* h = reinterpret_cast<const std::byte*>(storage_.data());
  Origin o;
  o.subring = get_u32(h + 12);
  o.rank = get_u32(h + 16);
  o.lane = get_u32(h + 20);
  o.world_rank = get_u32(h + 24);
  o.measurement = get_u64(h + 32);
  return o;
}

void GSigma::set_origin(const Origin& origin) {
  std::byte* h = reinterpret_cast<std::byte*>(storage_.data());
  put_u32(h + 12, origin.subring);
  put_u32(h + 16, origin.rank);
  put_u32(h + 20, origin.lane);
  put_u32(h + 24, origin.world_rank);
  put_u64(h + 32, origin.measurement);
}

bool GSigma::header_valid() const {
  const std::byte* h = reinterpret_cast<const std::byte*>(storage_.data());
  return get_u32(h + 0) == kMagic && get_u32(h + 4) == space_.n_k() && get_u32(h + 8) == space_.n_w() &&
         get_u64(h + 40) == matrix_bytes();
}

std::span<Complex> GSigma::up_data() noexcept {
  const std::size_t nn = std::size_t{n()} * n();
  return std::span<Complex>(storage_).subspan(kHeaderSlots, nn);
}

std::span<const Complex> GSigma::up_data() const noexcept {
  const std::size_t nn = std::size_t{n()} * n();
  return std::span<const Complex>(storage_).subspan(kHeaderSlots, nn);
}

std::span<Complex> GSigma::down_data() noexcept {
  const std::size_t nn = std::size_t{n()} * n();
  return std::span<Complex>(storage_).subspan(kHeaderSlots + nn, nn);
}

std::span<const Complex> GSigma::down_data() const noexcept {
  const std::size_t nn = std::size_t{n()} * n();
  return std::span<const Complex>(storage_).subspan(kHeaderSlots + nn, nn);
}

std::span<std::byte> GSigma::bytes() noexcept { return std::as_writable_bytes(std::span<Complex>(storage_)); }

std::span<const std::byte> GSigma::bytes() const noexcept {
  return std::as_bytes(std::span<const Complex>(storage_));
}

void fill_gsigma(GSigma& g, std::uint64_t seed, const Origin& origin, ValueMode mode) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const std::uint32_t n = g.n();
  const auto meas = static_cast<std::uint32_t>(origin.measurement);
  const auto meas_hi = static_cast<std::uint32_t>(origin.measurement >> 32);

  for (std::uint32_t matrix = 0; matrix < 2; ++matrix) {
    auto values = matrix == 0 ? g.up_data() : g.down_data();
    // c1 packs lane (< 2^15), matrix bit and the high measurement word's low bits.
    const std::uint32_t c1 = (origin.lane & 0x7FFFu) | (matrix << 15) | (meas_hi << 16);
    for (std::uint32_t idx = 0; idx < n * n; ++idx) {
      const auto r = Philox4x32::generate({origin.world_rank, c1, meas, idx}, key);
      if (mode == ValueMode::kFloat) {
        const double radius = std::sqrt(Philox4x32::to_unit(r[0], r[1]));
        const double angle = 2.0 * std::numbers::pi * Philox4x32::to_unit(r[2], r[3]);
        values[idx] = Complex(radius * std::cos(angle), radius * std::sin(angle));
      } else {
        values[idx] = Complex(static_cast<double>(r[0] % 3) - 1.0, static_cast<double>(r[1] % 3) - 1.0);
      }
    }
  }
  g.set_origin(origin);
}

GSigma generate_gsigma(std::uint64_t seed, const Origin& origin, const CombinedIndexSpace& space, ValueMode mode) {
  GSigma g(space);
  fill_gsigma(g, seed, origin, mode);
  return g;
}

// ---------------------------------------------------------------- GtSlice

GtSlice::GtSlice(const CombinedIndexSpace& space, std::uint32_t lo, std::uint32_t hi)
    : space_(space), lo_(lo), hi_(hi) {
  if (lo >= hi || hi > space.size()) {
    throw ConfigError("slice range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      ") invalid for N=" + std::to_string(space.size()));
  }
  data_.assign(std::size_t{hi - lo} * space.size() * space.size(), Complex{});
}

std::size_t GtSlice::offset(std::uint32_t k1, std::uint32_t k2, std::uint32_t k3) const {
  const std::uint32_t n = space_.size();
  if (k1 >= n || k2 >= n || k3 < lo_ || k3 >= hi_) {
    throw DomainError("G_t index outside slice");
  }
  return (std::size_t{k3 - lo_} * n + k2) * n + k1;
}

Complex& GtSlice::at(std::uint32_t k1, std::uint32_t k2, std::uint32_t k3) { return data_[offset(k1, k2, k3)]; }

Complex GtSlice::at(std::uint32_t k1, std::uint32_t k2, std::uint32_t k3) const {
  return data_[offset(k1, k2, k3)];
}

void GtSlice::accumulate(const GSigma& g) { accumulate_g4(*this, g); }

void accumulate_g4(std::span<Complex> block, std::uint32_t lo, std::uint32_t hi, const GSigma& g) {
  const std::uint32_t n = g.n();
  if (lo >= hi || hi > n || block.size() != std::size_t{hi - lo} * n * n) {
    throw ContractViolation("accumulate_g4: block does not match [lo, hi) x N x N");
  }
  const Complex* up = g.up_data().data();
  const Complex* down = g.down_data().data();
  Complex* out = block.data();

  for (std::uint32_t k3 = lo; k3 < hi; ++k3) {
    for (std::uint32_t k2 = 0; k2 < n; ++k2) {
      const std::uint32_t d32 = k3 >= k2 ? k3 - k2 : k3 + n - k2;
      const Complex* up_row = up + std::size_t{d32} * n;
      const Complex* down_row = down + std::size_t{d32} * n;
      const Complex* up_k2 = up + std::size_t{k2} * n;
      const Complex* down_k2 = down + std::size_t{k2} * n;
      for (std::uint32_t k1 = 0; k1 < n; ++k1) {
        const std::uint32_t d31 = k3 >= k1 ? k3 - k1 : k3 + n - k1;
        // sigma = +1 then sigma = -1
        Complex acc = *out;
        acc += mul(up_row[d31], down_k2[k1]);
        acc += mul(down_row[d31], up_k2[k1]);
        *out++ = acc;
      }
    }
  }
}

void accumulate_g4(GtSlice& slice, const GSigma& g) {
  if (!(slice.space() == g.space())) {
    throw ContractViolation("accumulate_g4: slice and G_sigma index spaces differ");
  }
  accumulate_g4(slice.data(), slice.lo(), slice.hi(), g);
  slice.set_meas_count(slice.meas_count() + 1);
}

// ---------------------------------------------------------------- oracle

std::vector<Origin> ExperimentShape::origins() const {
  std::vector<Origin> out;
  if (subring_size == 0 || world_size % subring_size != 0) {
    throw ConfigError("experiment shape: sub-ring size must divide world size");
  }
  out.reserve(std::size_t{world_size} * lanes * measurements);
  for (std::uint32_t r = 0; r < world_size; ++r) {
    for (std::uint32_t lane = 0; lane < lanes; ++lane) {
      for (std::uint64_t m = 0; m < measurements; ++m) {
        out.push_back(Origin{r / subring_size, r % subring_size, lane, m, r});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

GtSlice oracle_accumulate(std::uint64_t seed, const ExperimentShape& shape, const CombinedIndexSpace& space,
                          ValueMode mode) {
  GtSlice full = GtSlice::full(space);
  GSigma g(space);
  for (const Origin& origin : shape.origins()) {
    fill_gsigma(g, seed, origin, mode);
    accumulate_g4(full, g);
  }
  return full;
}

PartitionPlan make_partition(std::uint32_t n, std::uint32_t p) {
  if (p == 0 || p > n) {
    throw ConfigError("cannot partition an axis of length " + std::to_string(n) + " over " + std::to_string(p) +
                      " ranks (need 1 <= p <= N)");
  }
  PartitionPlan plan{n, p, {}};
  plan.ranges.reserve(p);
  const std::uint32_t base = n / p;
  const std::uint32_t extra = n % p;
  std::uint32_t lo = 0;
  for (std::uint32_t i = 0; i < p; ++i) {
    const std::uint32_t len = base + (i < extra ? 1 : 0);
    plan.ranges.push_back({lo, lo + len});
    lo += len;
  }
  return plan;
}

}  // namespace gtring
