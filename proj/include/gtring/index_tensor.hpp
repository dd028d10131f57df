#pragma once

#include <complex>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gtring {

using Complex = std::complex<double>;

inline constexpr std::size_t kEntryBytes = sizeof(Complex);

/// Combined (momentum x frequency) index group. Index differences wrap
/// cyclically so every difference stays inside [0, N).
class CombinedIndexSpace {
 public:
  CombinedIndexSpace(std::uint32_t n_k, std::uint32_t n_w);

  std::uint32_t n_k() const noexcept { return n_k_; }
  std::uint32_t n_w() const noexcept { return n_w_; }
  std::uint32_t size() const noexcept { return n_k_ * n_w_; }

  friend bool operator==(const CombinedIndexSpace&, const CombinedIndexSpace&) = default;

 private:
  std::uint32_t n_k_;
  std::uint32_t n_w_;
};

/// (a - b) mod N. Throws DomainError when either index is outside [0, N).
std::uint32_t index_diff(std::uint32_t a, std::uint32_t b, const CombinedIndexSpace& space);

/// Where a G_sigma was born. Ordering is the canonical oracle order:
/// (subring, rank, lane, measurement). world_rank keys the generator so that
/// the same stream is produced regardless of how the world is cut into sub-rings.
struct Origin {
  std::uint32_t subring = 0;
  std::uint32_t rank = 0;
  std::uint32_t lane = 0;
  std::uint64_t measurement = 0;
  std::uint32_t world_rank = 0;

  friend auto operator<=>(const Origin&, const Origin&) = default;
};

enum class ValueMode { kFloat, kIntegerLattice };

/// Observer notified whenever a GSigma allocates matrix storage.
class AllocationObserver {
 public:
  virtual ~AllocationObserver() = default;
  virtual void on_gsigma_allocation(std::size_t matrix_bytes) = 0;
};

/// One measurement's single-particle function: spin-up and spin-down N x N
/// complex matrices behind a fixed little-endian header. The storage is the
/// wire format, so a buffer can be handed to a transport without serializing.
///
/// Header layout (48 bytes, little-endian):
///   0 u32 magic "GSG1" | 4 u32 n_k | 8 u32 n_w | 12 u32 subring | 16 u32 rank
///  20 u32 lane | 24 u32 world_rank | 28 u32 zero | 32 u64 measurement
///  40 u64 matrix payload bytes (2 N^2 16)
/// followed by the up matrix then the down matrix, row-major complex doubles.
class GSigma {
 public:
  static constexpr std::size_t kHeaderBytes = 48;
  static constexpr std::uint32_t kMagic = 0x31475347u;

  explicit GSigma(const CombinedIndexSpace& space, AllocationObserver* observer = nullptr);
  GSigma(const GSigma& other);
  GSigma(GSigma&& other) noexcept = default;
  GSigma& operator=(const GSigma& other);
  GSigma& operator=(GSigma&& other) noexcept = default;
  ~GSigma() = default;

  const CombinedIndexSpace& space() const noexcept { return space_; }
  std::uint32_t n() const noexcept { return space_.size(); }

  Origin origin() const;
  void set_origin(const Origin& origin);

  /// True when the header carries the magic, this buffer's dimensions and payload size.
  bool header_valid() const;

  Complex up(std::uint32_t row, std::uint32_t col) const { return up_data()[row * n() + col]; }
  Complex down(std::uint32_t row, std::uint32_t col) const { return down_data()[row * n() + col]; }

  std::span<Complex> up_data() noexcept;
  std::span<const Complex> up_data() const noexcept;
  std::span<Complex> down_data() noexcept;
  std::span<const Complex> down_data() const noexcept;

  std::span<std::byte> bytes() noexcept;
  std::span<const std::byte> bytes() const noexcept;

  /// 2 N^2 entry bytes; the header is not counted.
  std::size_t matrix_bytes() const noexcept { return 2 * std::size_t{n()} * n() * kEntryBytes; }
  std::size_t wire_bytes() const noexcept { return kHeaderBytes + matrix_bytes(); }

  /// Address of the storage; stable across swaps of the owning handle.
  const void* storage_id() const noexcept { return storage_.data(); }

  friend void swap(GSigma& a, GSigma& b) noexcept;

 private:
  static constexpr std::size_t kHeaderSlots = kHeaderBytes / sizeof(Complex);

  void write_header_dims();

  CombinedIndexSpace space_;
  AllocationObserver* observer_;
  std::vector<Complex> storage_;
};

/// Fills g deterministically from (seed, origin, matrix, row, col). Float mode
/// draws uniformly from the closed unit disk; integer mode draws real and
/// imaginary parts from {-1, 0, 1}.
void fill_gsigma(GSigma& g, std::uint64_t seed, const Origin& origin, ValueMode mode);

GSigma generate_gsigma(std::uint64_t seed, const Origin& origin, const CombinedIndexSpace& space,
                       ValueMode mode = ValueMode::kFloat);

/// Contiguous block [lo, hi) of G_t along the K3 axis. Entry (K1, K2, K3)
/// lives at ((K3 - lo) * N + K2) * N + K1.
class GtSlice {
 public:
  GtSlice(const CombinedIndexSpace& space, std::uint32_t lo, std::uint32_t hi);
  static GtSlice full(const CombinedIndexSpace& space) { return GtSlice(space, 0, space.size()); }

  const CombinedIndexSpace& space() const noexcept { return space_; }
  std::uint32_t lo() const noexcept { return lo_; }
  std::uint32_t hi() const noexcept { return hi_; }
  std::uint64_t meas_count() const noexcept { return meas_count_; }
  void set_meas_count(std::uint64_t count) noexcept { meas_count_ = count; }

  std::size_t entry_count() const noexcept { return data_.size(); }
  std::size_t byte_size() const noexcept { return data_.size() * kEntryBytes; }

  Complex& at(std::uint32_t k1, std::uint32_t k2, std::uint32_t k3);
  Complex at(std::uint32_t k1, std::uint32_t k2, std::uint32_t k3) const;

  std::span<Complex> data() noexcept { return data_; }
  std::span<const Complex> data() const noexcept { return data_; }

  void accumulate(const GSigma& g);

 private:
  std::size_t offset(std::uint32_t k1, std::uint32_t k2, std::uint32_t k3) const;

  CombinedIndexSpace space_;
  std::uint32_t lo_;
  std::uint32_t hi_;
  std::vector<Complex> data_;
  std::uint64_t meas_count_ = 0;
};

/// Raw kernel: for K3 in [lo, hi), all K1 and K2,
///   block(K1,K2,K3) += sum_sigma G_sigma(K3-K2, K3-K1) * G_-sigma(K2, K1).
/// block must hold exactly (hi - lo) N^2 entries; nothing outside it is touched.
void accumulate_g4(std::span<Complex> block, std::uint32_t lo, std::uint32_t hi, const GSigma& g);

/// Slice-level wrapper: checks the index spaces agree and bumps meas_count.
void accumulate_g4(GtSlice& slice, const GSigma& g);

/// Every (subring, rank, lane, measurement) tuple of a distributed run.
struct ExperimentShape {
  std::uint32_t world_size = 1;
  std::uint32_t subring_size = 1;
  std::uint32_t lanes = 1;
  std::uint64_t measurements = 0;

  std::vector<Origin> origins() const;
};

/// Serial ground truth: regenerates every G_sigma of the shape and accumulates
/// them into one full tensor in canonical origin order.
GtSlice oracle_accumulate(std::uint64_t seed, const ExperimentShape& shape,
                          const CombinedIndexSpace& space, ValueMode mode = ValueMode::kFloat);

struct AxisRange {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  std::uint32_t size() const noexcept { return hi - lo; }
  friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

struct PartitionPlan {
  std::uint32_t n = 0;
  std::uint32_t p = 0;
  std::vector<AxisRange> ranges;
};

/// Balanced contiguous split of [0, n) into p ranges; the first n % p ranges
/// get one extra index. Throws ConfigError unless 1 <= p <= n.
PartitionPlan make_partition(std::uint32_t n, std::uint32_t p);

}  // namespace gtring
