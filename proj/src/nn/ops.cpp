// SPDX-License-Identifier: Apache-2.0
//
// chanrep - MIMO-OFDM channel representation and geolocation-based precoding
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chanrep/nn/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace chanrep::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

Tape& same_tape(Var a, Var b) {
    if (a.tape() == nullptr || a.tape() != b.tape())
        throw std::logic_error("ops: operands live on different tapes");
    return *a.tape();
}

Tape& own_tape(Var a) {
    if (a.tape() == nullptr) throw std::logic_error("ops: empty operand");
    return *a.tape();
}

// Node ids are assigned sequentially, so the id of the node about to be
// created is the current tape size; backward closures capture it directly.
int next_id(const Tape& t) { return static_cast<int>(t.size()); }

} // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
    const int ia = a.id(), ib = b.id(), io = next_id(t);
    return t.node(a.value() * b.value(), ng, [ia, ib, io](Tape& tp) {
        const Mat& g = tp.grad(io);
        tp.accumulate(ia, g * tp.value(ib).transpose());
        tp.accumulate(ib, tp.value(ia).transpose() * g);
    });
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("add: shape mismatch");
    const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
    const int ia = a.id(), ib = b.id(), io = next_id(t);
    return t.node(a.value() + b.value(), ng, [ia, ib, io](Tape& tp) {
        tp.accumulate(ia, tp.grad(io));
        tp.accumulate(ib, tp.grad(io));
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("sub: shape mismatch");
    const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
    const int ia = a.id(), ib = b.id(), io = next_id(t);
    return t.node(a.value() - b.value(), ng, [ia, ib, io](Tape& tp) {
        tp.accumulate(ia, tp.grad(io));
        tp.accumulate(ib, -tp.grad(io));
    });
}

Var cmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("cmul: shape mismatch");
    const bool ng = t.needs_grad(a.id()) || t.needs_grad(b.id());
    const int ia = a.id(), ib = b.id(), io = next_id(t);
    return t.node(a.value().cwiseProduct(b.value()), ng, [ia, ib, io](Tape& tp) {
        tp.accumulate(ia, tp.grad(io).cwiseProduct(tp.value(ib)));
        tp.accumulate(ib, tp.grad(io).cwiseProduct(tp.value(ia)));
    });
}

Var scale(Var a, double s) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    return t.node(s * a.value(), ng,
                  [ia, io, s](Tape& tp) { tp.accumulate(ia, s * tp.grad(io)); });
}

Var transpose(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    return t.node(a.value().transpose(), ng,
                  [ia, io](Tape& tp) { tp.accumulate(ia, tp.grad(io).transpose()); });
}

Var cols(Var a, int j0, int n) {
    Tape& t = own_tape(a);
    if (j0 < 0 || n < 1 || j0 + n > a.cols()) throw std::invalid_argument("cols: bad range");
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    return t.node(a.value().middleCols(j0, n), ng, [ia, io, j0, n](Tape& tp) {
        Mat g = Mat::Zero(tp.value(ia).rows(), tp.value(ia).cols());
        g.middleCols(j0, n) = tp.grad(io);
        tp.accumulate(ia, g);
    });
}

Var hcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("hcat: no operands");
    Tape& t = own_tape(parts.front());
    Eigen::Index rows = parts.front().rows(), total = 0;
    bool ng = false;
    for (const Var& p : parts) {
        same_tape(parts.front(), p);
        if (p.rows() != rows) throw std::invalid_argument("hcat: row mismatch");
        total += p.cols();
        ng = ng || t.needs_grad(p.id());
    }
    Mat value(rows, total);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const Var& p : parts) {
        value.middleCols(off, p.cols()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.cols();
    }
    const int io = next_id(t);
    return t.node(std::move(value), ng, [ids, offsets, io](Tape& tp) {
        const Mat& g = tp.grad(io);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const Eigen::Index w = tp.value(ids[i]).cols();
            tp.accumulate(ids[i], g.middleCols(offsets[i], w));
        }
    });
}

Var vcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("vcat: no operands");
    Tape& t = own_tape(parts.front());
    Eigen::Index cols_n = parts.front().cols(), total = 0;
    bool ng = false;
    for (const Var& p : parts) {
        same_tape(parts.front(), p);
        if (p.cols() != cols_n) throw std::invalid_argument("vcat: column mismatch");
        total += p.rows();
        ng = ng || t.needs_grad(p.id());
    }
    Mat value(total, cols_n);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const Var& p : parts) {
        value.middleRows(off, p.rows()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.rows();
    }
    const int io = next_id(t);
    return t.node(std::move(value), ng, [ids, offsets, io](Tape& tp) {
        const Mat& g = tp.grad(io);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const Eigen::Index h = tp.value(ids[i]).rows();
            tp.accumulate(ids[i], g.middleRows(offsets[i], h));
        }
    });
}

Var add_rowvec(Var a, Var v) {
    Tape& t = same_tape(a, v);
    if (v.rows() != 1 || v.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: v must be 1 x cols(a)");
    const bool ng = t.needs_grad(a.id()) || t.needs_grad(v.id());
    const int ia = a.id(), iv = v.id(), io = next_id(t);
    Mat value = a.value();
    value.rowwise() += v.value().row(0);
    return t.node(std::move(value), ng, [ia, iv, io](Tape& tp) {
        const Mat& g = tp.grad(io);
        tp.accumulate(ia, g);
        tp.accumulate(iv, g.colwise().sum());
    });
}

Var mul_rowvec(Var a, Var v) {
    Tape& t = same_tape(a, v);
    if (v.rows() != 1 || v.cols() != a.cols())
        throw std::invalid_argument("mul_rowvec: v must be 1 x cols(a)");
    const bool ng = t.needs_grad(a.id()) || t.needs_grad(v.id());
    const int ia = a.id(), iv = v.id(), io = next_id(t);
    Mat value = a.value().array().rowwise() * v.value().row(0).array();
    return t.node(std::move(value), ng, [ia, iv, io](Tape& tp) {
        const Mat& g = tp.grad(io);
        tp.accumulate(ia, g.array().rowwise() * tp.value(iv).row(0).array());
        tp.accumulate(iv, (g.array() * tp.value(ia).array()).colwise().sum());
    });
}

Var relu(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    return t.node(a.value().cwiseMax(0.0), ng, [ia, io](Tape& tp) {
        const Mat mask = (tp.value(ia).array() > 0.0).cast<double>();
        tp.accumulate(ia, tp.grad(io).cwiseProduct(mask));
    });
}

Var gelu(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    Mat value = a.value().unaryExpr(
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
    return t.node(std::move(value), ng, [ia, io](Tape& tp) {
        const Mat d = tp.value(ia).unaryExpr([](double x) {
            return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
                   x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        });
        tp.accumulate(ia, tp.grad(io).cwiseProduct(d));
    });
}

Var softmax_rows(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    Mat y = a.value();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double m = y.row(r).maxCoeff();
        y.row(r) = (y.row(r).array() - m).exp();
        y.row(r) /= y.row(r).sum();
    }
    return t.node(std::move(y), ng, [ia, io](Tape& tp) {
        const Mat& yv = tp.value(io);
        const Mat& g = tp.grad(io);
        Mat out(yv.rows(), yv.cols());
        for (Eigen::Index r = 0; r < yv.rows(); ++r) {
            const double dot = g.row(r).dot(yv.row(r));
            out.row(r) = yv.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
        }
        tp.accumulate(ia, out);
    });
}

Var layernorm_rows(Var a, double eps) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    const Mat& x = a.value();
    const Eigen::Index d = x.cols();
    Mat y(x.rows(), d);
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(d);
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        y.row(r) = (x.row(r).array() - mu) * inv_std(r);
    }
    auto inv = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
    return t.node(std::move(y), ng, [ia, io, inv](Tape& tp) {
        const Mat& yv = tp.value(io);
        const Mat& g = tp.grad(io);
        const Eigen::Index d2 = yv.cols();
        Mat out(yv.rows(), d2);
        for (Eigen::Index r = 0; r < yv.rows(); ++r) {
            const double gm = g.row(r).mean();
            const double gy = g.row(r).dot(yv.row(r)) / static_cast<double>(d2);
            out.row(r) =
                ((g.row(r).array() - gm) - yv.row(r).array() * gy) * (*inv)(r);
        }
        tp.accumulate(ia, out);
    });
}

Var l2_normalize_rows(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    const Mat& x = a.value();
    Mat y(x.rows(), x.cols());
    Eigen::VectorXd inv_norm(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double n = x.row(r).norm();
        if (!(n > 1e-300)) throw std::invalid_argument("l2_normalize_rows: zero-norm row");
        inv_norm(r) = 1.0 / n;
        y.row(r) = x.row(r) * inv_norm(r);
    }
    auto inv = std::make_shared<Eigen::VectorXd>(std::move(inv_norm));
    return t.node(std::move(y), ng, [ia, io, inv](Tape& tp) {
        const Mat& yv = tp.value(io);
        const Mat& g = tp.grad(io);
        Mat out(yv.rows(), yv.cols());
        for (Eigen::Index r = 0; r < yv.rows(); ++r) {
            const double gy = g.row(r).dot(yv.row(r));
            out.row(r) = (g.row(r) - gy * yv.row(r)) * (*inv)(r);
        }
        tp.accumulate(ia, out);
    });
}

Var logsumexp_rows(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    const Mat& x = a.value();
    Mat value(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        value(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
    }
    return t.node(std::move(value), ng, [ia, io](Tape& tp) {
        const Mat& x2 = tp.value(ia);
        const Mat& l = tp.value(io);
        const Mat& g = tp.grad(io);
        Mat out(x2.rows(), x2.cols());
        for (Eigen::Index r = 0; r < x2.rows(); ++r)
            out.row(r) = g(r, 0) * (x2.row(r).array() - l(r, 0)).exp();
        tp.accumulate(ia, out);
    });
}

Var mean_rows(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    const double inv = 1.0 / static_cast<double>(a.rows());
    return t.node(a.value().colwise().mean(), ng, [ia, io, inv](Tape& tp) {
        const Mat& g = tp.grad(io);
        Mat out(tp.value(ia).rows(), tp.value(ia).cols());
        out.rowwise() = (inv * g).row(0);
        tp.accumulate(ia, out);
    });
}

Var sum_all(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    Mat value(1, 1);
    value(0, 0) = a.value().sum();
    return t.node(std::move(value), ng, [ia, io](Tape& tp) {
        tp.accumulate(ia, Mat::Constant(tp.value(ia).rows(), tp.value(ia).cols(),
                                        tp.grad(io)(0, 0)));
    });
}

Var sum_sq(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    Mat value(1, 1);
    value(0, 0) = a.value().squaredNorm();
    return t.node(std::move(value), ng, [ia, io](Tape& tp) {
        tp.accumulate(ia, 2.0 * tp.grad(io)(0, 0) * tp.value(ia));
    });
}

Var entry(Var a, int i, int j) {
    Tape& t = own_tape(a);
    if (i < 0 || i >= a.rows() || j < 0 || j >= a.cols())
        throw std::invalid_argument("entry: index out of range");
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    Mat value(1, 1);
    value(0, 0) = a.value()(i, j);
    return t.node(std::move(value), ng, [ia, io, i, j](Tape& tp) {
        Mat g = Mat::Zero(tp.value(ia).rows(), tp.value(ia).cols());
        g(i, j) = tp.grad(io)(0, 0);
        tp.accumulate(ia, g);
    });
}

Var conv1d(Var x, Var w, Var b, int ksize, int stride) {
    Tape& t = same_tape(x, w);
    same_tape(x, b);
    const Eigen::Index len = x.rows(), cin = x.cols(), cout = w.cols();
    if (ksize < 1 || stride < 1) throw std::invalid_argument("conv1d: bad kernel or stride");
    if (w.rows() != static_cast<Eigen::Index>(ksize) * cin)
        throw std::invalid_argument("conv1d: kernel shape mismatch");
    if (b.rows() != 1 || b.cols() != cout)
        throw std::invalid_argument("conv1d: bias shape mismatch");
    const int pad = (ksize - 1) / 2;
    const Eigen::Index out_len = (len + stride - 1) / stride;

    const Mat& xv = x.value();
    const Mat& wv = w.value();
    Mat value(out_len, cout);
    value.rowwise() = b.value().row(0);
    for (Eigen::Index i = 0; i < out_len; ++i)
        for (int u = 0; u < ksize; ++u) {
            const Eigen::Index src = i * stride - pad + u;
            if (src < 0 || src >= len) continue;
            value.row(i).noalias() += xv.row(src) * wv.middleRows(u * cin, cin);
        }

    const bool ng = t.needs_grad(x.id()) || t.needs_grad(w.id()) || t.needs_grad(b.id());
    const int ix = x.id(), iw = w.id(), ib = b.id(), io = next_id(t);
    return t.node(std::move(value), ng, [ix, iw, ib, io, ksize, stride, pad](Tape& tp) {
        const Mat& g = tp.grad(io);
        const Mat& xv2 = tp.value(ix);
        const Mat& wv2 = tp.value(iw);
        const Eigen::Index len2 = xv2.rows(), cin2 = xv2.cols();

        tp.accumulate(ib, g.colwise().sum());

        Mat gx = Mat::Zero(len2, cin2);
        Mat gw = Mat::Zero(wv2.rows(), wv2.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (int u = 0; u < ksize; ++u) {
                const Eigen::Index src = i * stride - pad + u;
                if (src < 0 || src >= len2) continue;
                gx.row(src).noalias() += g.row(i) * wv2.middleRows(u * cin2, cin2).transpose();
                gw.middleRows(u * cin2, cin2).noalias() += xv2.row(src).transpose() * g.row(i);
            }
        tp.accumulate(ix, gx);
        tp.accumulate(iw, gw);
    });
}

Var upsample_rows2(Var a) {
    Tape& t = own_tape(a);
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    const Mat& x = a.value();
    Mat value(2 * x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        value.row(2 * r) = x.row(r);
        value.row(2 * r + 1) = x.row(r);
    }
    return t.node(std::move(value), ng, [ia, io](Tape& tp) {
        const Mat& g = tp.grad(io);
        Mat out(g.rows() / 2, g.cols());
        for (Eigen::Index r = 0; r < out.rows(); ++r)
            out.row(r) = g.row(2 * r) + g.row(2 * r + 1);
        tp.accumulate(ia, out);
    });
}

Var remap(Var a, int out_rows, int out_cols, std::shared_ptr<const std::vector<int>> map) {
    Tape& t = own_tape(a);
    if (!map || static_cast<int>(map->size()) != out_rows * out_cols)
        throw std::invalid_argument("remap: index map size mismatch");
    const Eigen::Index in_size = a.rows() * a.cols();
    const Eigen::Index in_cols = a.cols();
    const Mat& x = a.value();
    Mat value(out_rows, out_cols);
    for (int i = 0; i < out_rows; ++i)
        for (int j = 0; j < out_cols; ++j) {
            const int src = (*map)[static_cast<std::size_t>(i) * out_cols + j];
            if (src < 0) {
                value(i, j) = 0.0;
                continue;
            }
            if (src >= in_size) throw std::invalid_argument("remap: index out of range");
            value(i, j) = x(src / in_cols, src % in_cols);
        }
    const bool ng = t.needs_grad(a.id());
    const int ia = a.id(), io = next_id(t);
    return t.node(std::move(value), ng, [ia, io, map, out_cols](Tape& tp) {
        const Mat& g = tp.grad(io);
        const Eigen::Index in_cols2 = tp.value(ia).cols();
        Mat out = Mat::Zero(tp.value(ia).rows(), in_cols2);
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) {
                const int src = (*map)[static_cast<std::size_t>(i) * out_cols + j];
                if (src < 0) continue;
                out(src / in_cols2, src % in_cols2) += g(i, j);
            }
        tp.accumulate(ia, out);
    });
}

} // namespace chanrep::nn
