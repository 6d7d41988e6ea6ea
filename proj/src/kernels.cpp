#include "seqdesign/kernels.hpp"

#include <atomic>

namespace seqdesign::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }

void matmul_ref(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<long>(i) * k;
        double* ci = c + static_cast<long>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    if (!parallel_enabled() || m < 2) {
        matmul_ref(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<long>(i) * k;
        double* ci = c + static_cast<long>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_acc_ref(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<long>(i) * k;
        double* ci = c + static_cast<long>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    if (!parallel_enabled() || m < 2) {
        matmul_acc_ref(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<long>(i) * k;
        double* ci = c + static_cast<long>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<long>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

namespace {

inline void conv1d_row(const double* x, const double* w, double* y,
                       int len, int cin, int cout, int kw, int pos) {
    const int half = kw / 2;
    double* yp = y + static_cast<long>(pos) * cout;
    for (int oc = 0; oc < cout; ++oc) yp[oc] = 0.0;
    for (int tap = 0; tap < kw; ++tap) {
        const int src = pos + tap - half;
        if (src < 0 || src >= len) continue;
        const double* xp = x + static_cast<long>(src) * cin;
        for (int oc = 0; oc < cout; ++oc) {
            const double* wrow = w + (static_cast<long>(oc) * cin) * kw;
            double acc = 0.0;
            for (int ic = 0; ic < cin; ++ic) acc += xp[ic] * wrow[static_cast<long>(ic) * kw + tap];
            yp[oc] += acc;
        }
    }
}

inline void conv1d_grad_input_row(const double* dy, const double* w, double* dx,
                                  int len, int cin, int cout, int kw, int pos) {
    const int half = kw / 2;
    double* dxp = dx + static_cast<long>(pos) * cin;
    // y[out_pos] reads x[pos] at tap = pos - out_pos + half.
    for (int tap = 0; tap < kw; ++tap) {
        const int out_pos = pos - tap + half;
        if (out_pos < 0 || out_pos >= len) continue;
        const double* dyp = dy + static_cast<long>(out_pos) * cout;
        for (int oc = 0; oc < cout; ++oc) {
            const double g = dyp[oc];
            const double* wrow = w + (static_cast<long>(oc) * cin) * kw;
            for (int ic = 0; ic < cin; ++ic) {
                dxp[ic] += g * wrow[static_cast<long>(ic) * kw + tap];
            }
        }
    }
}

inline void conv1d_grad_weight_oc(const double* x, const double* dy, double* dw,
                                  int len, int cin, int cout, int kw, int oc) {
    const int half = kw / 2;
    double* dwrow = dw + (static_cast<long>(oc) * cin) * kw;
    for (int pos = 0; pos < len; ++pos) {
        const double g = dy[static_cast<long>(pos) * cout + oc];
        if (g == 0.0) continue;
        for (int tap = 0; tap < kw; ++tap) {
            const int src = pos + tap - half;
            if (src < 0 || src >= len) continue;
            const double* xp = x + static_cast<long>(src) * cin;
            for (int ic = 0; ic < cin; ++ic) {
                dwrow[static_cast<long>(ic) * kw + tap] += g * xp[ic];
            }
        }
    }
}

} // namespace

void conv1d_ref(const double* x, const double* w, double* y,
                int len, int cin, int cout, int kw) {
    for (int pos = 0; pos < len; ++pos) conv1d_row(x, w, y, len, cin, cout, kw, pos);
}

void conv1d(const double* x, const double* w, double* y,
            int len, int cin, int cout, int kw) {
    if (!parallel_enabled() || len < 2) {
        conv1d_ref(x, w, y, len, cin, cout, kw);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int pos = 0; pos < len; ++pos) conv1d_row(x, w, y, len, cin, cout, kw, pos);
}

void conv1d_grad_input_ref(const double* dy, const double* w, double* dx,
                           int len, int cin, int cout, int kw) {
    for (int pos = 0; pos < len; ++pos) {
        conv1d_grad_input_row(dy, w, dx, len, cin, cout, kw, pos);
    }
}

void conv1d_grad_input(const double* dy, const double* w, double* dx,
                       int len, int cin, int cout, int kw) {
    if (!parallel_enabled() || len < 2) {
        conv1d_grad_input_ref(dy, w, dx, len, cin, cout, kw);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int pos = 0; pos < len; ++pos) {
        conv1d_grad_input_row(dy, w, dx, len, cin, cout, kw, pos);
    }
}

void conv1d_grad_weight_ref(const double* x, const double* dy, double* dw,
                            int len, int cin, int cout, int kw) {
    for (int oc = 0; oc < cout; ++oc) {
        conv1d_grad_weight_oc(x, dy, dw, len, cin, cout, kw, oc);
    }
}

void conv1d_grad_weight(const double* x, const double* dy, double* dw,
                        int len, int cin, int cout, int kw) {
    if (!parallel_enabled() || cout < 2) {
        conv1d_grad_weight_ref(x, dy, dw, len, cin, cout, kw);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < cout; ++oc) {
        conv1d_grad_weight_oc(x, dy, dw, len, cin, cout, kw, oc);
    }
}

} // namespace seqdesign::kernels
