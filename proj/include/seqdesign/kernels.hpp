#pragma once

namespace seqdesign::kernels {

// Heavy inner loops used by the autodiff ops. Each kernel has a serial
// reference implementation and an OpenMP variant; both compute every output
// element independently (no shared accumulators), so results are bitwise
// identical regardless of thread count. The parallel variants are selected
// by default; tests and the benchmark flip the switch to compare.

bool parallel_enabled();
void set_parallel(bool enabled);

// c[m,n] = a[m,k] * b[k,n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_ref(const double* a, const double* b, double* c, int m, int k, int n);

// c[m,n] += a[m,k] * b[k,n]
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_acc_ref(const double* a, const double* b, double* c, int m, int k, int n);

// "same"-padded 1-D convolution over positions.
//   x: [len, cin]  w: [cout, cin, kw]  y: [len, cout],  kw odd
void conv1d(const double* x, const double* w, double* y,
            int len, int cin, int cout, int kw);
void conv1d_ref(const double* x, const double* w, double* y,
                int len, int cin, int cout, int kw);

// Gradient of conv1d w.r.t. input: dx[len, cin] += sum over taps of dy * w.
void conv1d_grad_input(const double* dy, const double* w, double* dx,
                       int len, int cin, int cout, int kw);
void conv1d_grad_input_ref(const double* dy, const double* w, double* dx,
                           int len, int cin, int cout, int kw);

// Gradient of conv1d w.r.t. weights: dw[cout, cin, kw] += x outer dy.
void conv1d_grad_weight(const double* x, const double* dy, double* dw,
                        int len, int cin, int cout, int kw);
void conv1d_grad_weight_ref(const double* x, const double* dy, double* dw,
                            int len, int cin, int cout, int kw);

} // namespace seqdesign::kernels
