#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "spinlab/lattice.hpp"
#include "spinlab/spin.hpp"

// Lattice convolution against a displacement kernel on a zero-padded torus.
// Torus side M >= 2*(field_half + out_half) + 1 makes the circular result
// alias-free on the output box, so the values equal the direct pair sums.

namespace spinlab {

inline bool fft_size_smooth(long v) {
  for (long p : {2L, 3L, 5L, 7L})
    while (v % p == 0) v /= p;
  return v == 1;
}

inline long next_good_fft_size(long m) {
  long v = m;
  while (!fft_size_smooth(v)) ++v;
  return v;
}

// FFTW planning is not thread-safe; execution on private buffers is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

class Convolver {
 public:
  Convolver(int d, long field_half, long out_half,
            const std::function<double(const Site&)>& kernel)
      : d_(d), fbox_(d, field_half), obox_(d, out_half) {
    m_ = next_good_fft_size(2 * (field_half + out_half) + 1);
    total_ = 1;
    for (int i = 0; i < d_; ++i) total_ *= m_;

    in_ = fftw_alloc_complex(static_cast<std::size_t>(total_));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(total_));
    if (!in_ || !out_) throw std::bad_alloc();
    {
      std::lock_guard<std::mutex> lk(fftw_plan_mutex());
      int dims[kMaxDim];
      for (int i = 0; i < d_; ++i) dims[i] = static_cast<int>(m_);
      fwd_ = fftw_plan_dft(d_, dims, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft(d_, dims, out_, in_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!fwd_ || !bwd_) throw std::runtime_error("fftw plan failed");

    scatter_.resize(static_cast<std::size_t>(fbox_.site_count()));
    for (long long i = 0; i < fbox_.site_count(); ++i)
      scatter_[static_cast<std::size_t>(i)] = torus_index(fbox_.site_at(i));
    gather_.resize(static_cast<std::size_t>(obox_.site_count()));
    for (long long i = 0; i < obox_.site_count(); ++i)
      gather_[static_cast<std::size_t>(i)] = torus_index(obox_.site_at(i));

    std::memset(in_, 0, sizeof(fftw_complex) * static_cast<std::size_t>(total_));
    Box kbox(d_, field_half + out_half);
    for_each_site(kbox, [&](const Site& z) {
      if (linf_norm(z) == 0) return;
      in_[torus_index(z)][0] = kernel(z);
    });
    fftw_execute(fwd_);
    khat_.resize(static_cast<std::size_t>(total_));
    const double norm = 1.0 / static_cast<double>(total_);
    for (long long k = 0; k < total_; ++k)
      khat_[static_cast<std::size_t>(k)] = {out_[k][0] * norm, out_[k][1] * norm};
  }

  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  ~Convolver() {
    std::lock_guard<std::mutex> lk(fftw_plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(in_);
    fftw_free(out_);
  }

  const Box& field_box() const { return fbox_; }
  const Box& out_box() const { return obox_; }
  long torus_side() const { return m_; }

  // result(x) = sum_{y in field box} kernel(y - x) * field(y), x in out box
  // (the kernel is used symmetrically, so correlation equals convolution).
  void convolve(const std::complex<double>* field, std::complex<double>* result) {
    std::memset(in_, 0, sizeof(fftw_complex) * static_cast<std::size_t>(total_));
    for (std::size_t i = 0; i < scatter_.size(); ++i) {
      in_[scatter_[i]][0] = field[i].real();
      in_[scatter_[i]][1] = field[i].imag();
    }
    fftw_execute(fwd_);
    for (long long k = 0; k < total_; ++k) {
      std::complex<double> v{out_[k][0], out_[k][1]};
      v *= khat_[static_cast<std::size_t>(k)];
      out_[k][0] = v.real();
      out_[k][1] = v.imag();
    }
    fftw_execute(bwd_);
    for (std::size_t i = 0; i < gather_.size(); ++i)
      result[i] = {in_[gather_[i]][0], in_[gather_[i]][1]};
  }

  // sum over ordered pairs x != y of kernel(y-x) field(x).field(y), where the
  // two real components are packed as real/imag parts; needs out box == field box.
  double quadratic_form(const std::vector<std::complex<double>>& field) {
    if (static_cast<long long>(field.size()) != fbox_.site_count())
      throw std::invalid_argument("field size mismatch");
    std::vector<std::complex<double>> conv(field.size());
    convolve(field.data(), conv.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i)
      acc += field[i].real() * conv[i].real() + field[i].imag() * conv[i].imag();
    return acc;
  }

  // B(x) = sum_{y in field box} kernel(y - x) for every x in the out box.
  std::vector<double> box_kernel_sums() {
    std::vector<std::complex<double>> ones(static_cast<std::size_t>(fbox_.site_count()),
                                           std::complex<double>{1.0, 0.0});
    std::vector<std::complex<double>> conv(static_cast<std::size_t>(obox_.site_count()));
    convolve(ones.data(), conv.data());
    std::vector<double> b(conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i) b[i] = conv[i].real();
    return b;
  }

 private:
  long long torus_index(const Site& z) const {
    long long idx = 0;
    for (int i = d_ - 1; i >= 0; --i) {
      long c = ((z.c[i] % m_) + m_) % m_;
      idx = idx * m_ + c;
    }
    return idx;
  }

  int d_;
  Box fbox_;
  Box obox_;
  long m_ = 0;
  long long total_ = 0;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
  std::vector<std::complex<double>> khat_;
  std::vector<long long> scatter_;
  std::vector<long long> gather_;
};

// First two spin components packed as one complex field in box index order.
inline std::vector<std::complex<double>> pack_plane_field(const SpinConfig& cfg) {
  const long long V = cfg.box().site_count();
  std::vector<std::complex<double>> f(static_cast<std::size_t>(V));
  for (long long i = 0; i < V; ++i) {
    const double* s = cfg.spin(i);
    f[static_cast<std::size_t>(i)] = {s[0], s[1]};
  }
  return f;
}

}  // namespace spinlab
