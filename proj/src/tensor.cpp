#include "ads/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

namespace ads::tensor {

namespace {

size_t shape_volume(const std::vector<int>& shape) {
    if (shape.empty()) throw Error("tensor: empty shape");
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw Error("tensor: non-positive dimension in shape");
        n *= static_cast<size_t>(d);
    }
    return n;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw Error(std::string(op) + ": shape mismatch " + shape_string(a) + " x " + shape_string(b));
}

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// add/mul accept identical shapes or a single-row second operand broadcast
// over the rows of the first.
enum class BroadcastKind { same, row };

BroadcastKind broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return BroadcastKind::same;
    if (a.rank() == 2 && b.rank() <= 2 && b.rows() == 1 && b.cols() == a.cols()) {
        return BroadcastKind::row;
    }
    shape_error(op, a, b);
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    size_t n = shape_volume(shape);
    t.shape = std::move(shape);
    t.data.assign(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    size_t n = shape_volume(shape);
    if (values.size() != n) throw Error("tensor: value count does not match shape");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

std::string shape_string(const Tensor& t) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < t.shape.size(); ++i) {
        if (i) os << ",";
        os << t.shape[i];
    }
    os << "]";
    return os.str();
}

Var Graph::emit(Tensor value, bool requires_grad, std::function<void(Graph&)> backprop) {
    Node n;
    if (requires_grad) n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) { return emit(std::move(value), false, nullptr); }

Var Graph::param(Tensor value) { return emit(std::move(value), true, nullptr); }

const Tensor& Graph::grad(Var v) const {
    const Node& n = node(v);
    if (!n.requires_grad) throw Error("graph: node does not track gradients");
    return n.grad;
}

void Graph::backward(Var loss) {
    Node& ln = node(loss);
    if (ln.value.size() != 1) throw Error("backward: loss must be scalar");
    if (!ln.requires_grad) return;  // graph of constants, all gradients are zero
    ln.grad.data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.requires_grad && n.backprop) n.backprop(*this);
    }
}

struct GraphOps {
    static bool tracks(const Graph& g, Var v) { return g.node(v).requires_grad; }
    static Tensor& grad_buf(Graph& g, Var v) { return g.node(v).grad; }
    static void attach(Graph& g, Var v, std::function<void(Graph&)> fn) {
        g.node(v).backprop = std::move(fn);
    }
};

Var Graph::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    BroadcastKind kind = broadcast_kind(av, bv, "add");
    Tensor out = av;
    if (kind == BroadcastKind::same) {
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    } else {
        int n = av.cols();
        for (int i = 0; i < av.rows(); ++i) {
            for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(i) * n + j] += bv.data[j];
        }
    }
    bool rg = node(a).requires_grad || node(b).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, b, kind](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            if (GraphOps::tracks(g, a)) {
                Tensor& da = GraphOps::grad_buf(g, a);
                for (size_t i = 0; i < G.data.size(); ++i) da.data[i] += G.data[i];
            }
            if (GraphOps::tracks(g, b)) {
                Tensor& db = GraphOps::grad_buf(g, b);
                if (kind == BroadcastKind::same) {
                    for (size_t i = 0; i < G.data.size(); ++i) db.data[i] += G.data[i];
                } else {
                    int n = G.cols();
                    for (int i = 0; i < G.rows(); ++i) {
                        for (int j = 0; j < n; ++j) {
                            db.data[j] += G.data[static_cast<size_t>(i) * n + j];
                        }
                    }
                }
            }
        });
    }
    return out_v;
}

Var Graph::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    BroadcastKind kind = broadcast_kind(av, bv, "mul");
    Tensor out = av;
    if (kind == BroadcastKind::same) {
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    } else {
        int n = av.cols();
        for (int i = 0; i < av.rows(); ++i) {
            for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(i) * n + j] *= bv.data[j];
        }
    }
    bool rg = node(a).requires_grad || node(b).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, b, kind](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& av2 = g.node(a).value;
            const Tensor& bv2 = g.node(b).value;
            int n = av2.cols();
            if (GraphOps::tracks(g, a)) {
                Tensor& da = GraphOps::grad_buf(g, a);
                if (kind == BroadcastKind::same) {
                    for (size_t i = 0; i < G.data.size(); ++i) da.data[i] += G.data[i] * bv2.data[i];
                } else {
                    for (int i = 0; i < av2.rows(); ++i) {
                        for (int j = 0; j < n; ++j) {
                            size_t k = static_cast<size_t>(i) * n + j;
                            da.data[k] += G.data[k] * bv2.data[j];
                        }
                    }
                }
            }
            if (GraphOps::tracks(g, b)) {
                Tensor& db = GraphOps::grad_buf(g, b);
                if (kind == BroadcastKind::same) {
                    for (size_t i = 0; i < G.data.size(); ++i) db.data[i] += G.data[i] * av2.data[i];
                } else {
                    for (int i = 0; i < av2.rows(); ++i) {
                        for (int j = 0; j < n; ++j) {
                            size_t k = static_cast<size_t>(i) * n + j;
                            db.data[j] += G.data[k] * av2.data[k];
                        }
                    }
                }
            }
        });
    }
    return out_v;
}

Var Graph::scale(Var a, double c) {
    Tensor out = value(a);
    for (double& x : out.data) x *= c;
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, c](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (size_t i = 0; i < G.data.size(); ++i) da.data[i] += c * G.data[i];
        });
    }
    return out_v;
}

Var Graph::matmul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0]) {
        shape_error("matmul", av, bv);
    }
    int m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = &av.data[static_cast<size_t>(i) * k];
        double* orow = &out.data[static_cast<size_t>(i) * n];
        for (int p = 0; p < k; ++p) {
            double aik = arow[p];
            if (aik == 0.0) continue;
            const double* brow = &bv.data[static_cast<size_t>(p) * n];
            for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    bool rg = node(a).requires_grad || node(b).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, b, m, k, n](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& av2 = g.node(a).value;
            const Tensor& bv2 = g.node(b).value;
            if (GraphOps::tracks(g, a)) {
                // dA = G * B^T
                Tensor& da = GraphOps::grad_buf(g, a);
                for (int i = 0; i < m; ++i) {
                    const double* grow = &G.data[static_cast<size_t>(i) * n];
                    double* darow = &da.data[static_cast<size_t>(i) * k];
                    for (int p = 0; p < k; ++p) {
                        const double* brow = &bv2.data[static_cast<size_t>(p) * n];
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                        darow[p] += s;
                    }
                }
            }
            if (GraphOps::tracks(g, b)) {
                // dB = A^T * G
                Tensor& db = GraphOps::grad_buf(g, b);
                for (int i = 0; i < m; ++i) {
                    const double* arow = &av2.data[static_cast<size_t>(i) * k];
                    const double* grow = &G.data[static_cast<size_t>(i) * n];
                    for (int p = 0; p < k; ++p) {
                        double aik = arow[p];
                        if (aik == 0.0) continue;
                        double* dbrow = &db.data[static_cast<size_t>(p) * n];
                        for (int j = 0; j < n; ++j) dbrow[j] += aik * grow[j];
                    }
                }
            }
        });
    }
    return out_v;
}

Var Graph::transpose(Var a) {
    const Tensor& av = value(a);
    if (av.rank() != 2) throw Error("transpose: expected rank-2, got " + shape_string(av));
    int m = av.shape[0], n = av.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(j) * m + i] = av.at(i, j);
    }
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, m, n](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < m; ++i) {
                    da.data[static_cast<size_t>(i) * n + j] += G.data[static_cast<size_t>(j) * m + i];
                }
            }
        });
    }
    return out_v;
}

Var Graph::concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw Error("concat: no inputs");
    if (axis != 0 && axis != 1) throw Error("concat: axis must be 0 or 1");
    // rank-1 parts are treated as single rows
    int total_rows = 0, total_cols = 0;
    int common_rows = value(parts[0]).rows();
    int common_cols = value(parts[0]).cols();
    for (Var p : parts) {
        const Tensor& t = value(p);
        if (axis == 0) {
            if (t.cols() != common_cols) shape_error("concat", value(parts[0]), t);
            total_rows += t.rows();
        } else {
            if (t.rows() != common_rows) shape_error("concat", value(parts[0]), t);
            total_cols += t.cols();
        }
    }
    if (axis == 0) total_cols = common_cols;
    else total_rows = common_rows;

    Tensor out = Tensor::zeros({total_rows, total_cols});
    bool rg = false;
    int row_off = 0, col_off = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        for (int i = 0; i < t.rows(); ++i) {
            for (int j = 0; j < t.cols(); ++j) {
                out.at(row_off + i, col_off + j) = t.data[static_cast<size_t>(i) * t.cols() + j];
            }
        }
        if (axis == 0) row_off += t.rows();
        else col_off += t.cols();
        rg = rg || node(p).requires_grad;
    }
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Var> held = parts;
        GraphOps::attach(*this, out_v, [out_v, held, axis](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            int ro = 0, co = 0;
            for (Var p : held) {
                const Tensor& t = g.node(p).value;
                if (GraphOps::tracks(g, p)) {
                    Tensor& dp = GraphOps::grad_buf(g, p);
                    for (int i = 0; i < t.rows(); ++i) {
                        for (int j = 0; j < t.cols(); ++j) {
                            dp.data[static_cast<size_t>(i) * t.cols() + j] += G.at(ro + i, co + j);
                        }
                    }
                }
                if (axis == 0) ro += t.rows();
                else co += t.cols();
            }
        });
    }
    return out_v;
}

Var Graph::slice(Var a, int row_begin, int row_end, int col_begin, int col_end) {
    const Tensor& av = value(a);
    int m = av.rows(), n = av.cols();
    if (row_begin < 0 || row_end > m || row_begin >= row_end || col_begin < 0 || col_end > n ||
        col_begin >= col_end) {
        throw Error("slice: bounds out of range for " + shape_string(av));
    }
    Tensor out = Tensor::zeros({row_end - row_begin, col_end - col_begin});
    for (int i = row_begin; i < row_end; ++i) {
        for (int j = col_begin; j < col_end; ++j) {
            out.at(i - row_begin, j - col_begin) = av.data[static_cast<size_t>(i) * n + j];
        }
    }
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, row_begin, col_begin, n](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (int i = 0; i < G.rows(); ++i) {
                for (int j = 0; j < G.cols(); ++j) {
                    da.data[static_cast<size_t>(i + row_begin) * n + (j + col_begin)] += G.at(i, j);
                }
            }
        });
    }
    return out_v;
}

Var Graph::softmax_rows(Var a) {
    const Tensor& av = value(a);
    int m = av.rows(), n = av.cols();
    Tensor out = av;
    for (int i = 0; i < m; ++i) {
        double* row = &out.data[static_cast<size_t>(i) * n];
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < n; ++j) row[j] /= sum;
    }
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, m, n](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& Y = g.node(out_v).value;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (int i = 0; i < m; ++i) {
                const double* grow = &G.data[static_cast<size_t>(i) * n];
                const double* yrow = &Y.data[static_cast<size_t>(i) * n];
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
                double* drow = &da.data[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) drow[j] += yrow[j] * (grow[j] - dot);
            }
        });
    }
    return out_v;
}

Var Graph::layer_norm_rows(Var a) {
    const Tensor& av = value(a);
    int m = av.rows(), n = av.cols();
    Tensor out = av;
    std::vector<double> rstd(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        double* row = &out.data[static_cast<size_t>(i) * n];
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = row[j] - mean;
            var += d * d;
        }
        var /= n;
        double r = 1.0 / std::sqrt(var + kLayerNormEps);
        rstd[static_cast<size_t>(i)] = r;
        for (int j = 0; j < n; ++j) row[j] = (row[j] - mean) * r;
    }
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, m, n, rstd](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& Y = g.node(out_v).value;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (int i = 0; i < m; ++i) {
                const double* grow = &G.data[static_cast<size_t>(i) * n];
                const double* yrow = &Y.data[static_cast<size_t>(i) * n];
                double gmean = 0.0, gymean = 0.0;
                for (int j = 0; j < n; ++j) {
                    gmean += grow[j];
                    gymean += grow[j] * yrow[j];
                }
                gmean /= n;
                gymean /= n;
                double r = rstd[static_cast<size_t>(i)];
                double* drow = &da.data[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) {
                    drow[j] += r * (grow[j] - gmean - yrow[j] * gymean);
                }
            }
        });
    }
    return out_v;
}

Var Graph::gelu(Var a) {
    const Tensor& av = value(a);
    Tensor out = av;
    for (double& x : out.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& X = g.node(a).value;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (size_t i = 0; i < G.data.size(); ++i) {
                double x = X.data[i];
                double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                da.data[i] += G.data[i] * (cdf + x * pdf);
            }
        });
    }
    return out_v;
}

Var Graph::l2_normalize_rows(Var a) {
    const Tensor& av = value(a);
    int m = av.rows(), n = av.cols();
    Tensor out = av;
    std::vector<double> norms(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        double* row = &out.data[static_cast<size_t>(i) * n];
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += row[j] * row[j];
        double nrm = std::sqrt(s);
        if (nrm == 0.0) throw Error("l2_normalize: zero row");
        norms[static_cast<size_t>(i)] = nrm;
        for (int j = 0; j < n; ++j) row[j] /= nrm;
    }
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, m, n, norms](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& Y = g.node(out_v).value;
            Tensor& da = GraphOps::grad_buf(g, a);
            for (int i = 0; i < m; ++i) {
                const double* grow = &G.data[static_cast<size_t>(i) * n];
                const double* yrow = &Y.data[static_cast<size_t>(i) * n];
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
                double inv = 1.0 / norms[static_cast<size_t>(i)];
                double* drow = &da.data[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) drow[j] += inv * (grow[j] - yrow[j] * dot);
            }
        });
    }
    return out_v;
}

Var Graph::mean(Var a) {
    const Tensor& av = value(a);
    double sum = 0.0;
    for (double x : av.data) sum += x;
    size_t count = av.data.size();
    Tensor out = Tensor::scalar(sum / static_cast<double>(count));
    bool rg = node(a).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, count](Graph& g) {
            double g0 = g.node(out_v).grad.data[0] / static_cast<double>(count);
            Tensor& da = GraphOps::grad_buf(g, a);
            for (double& x : da.data) x += g0;
        });
    }
    return out_v;
}

Var Graph::cross_entropy_rows(Var logits, std::vector<int> targets) {
    const Tensor& lv = value(logits);
    int m = lv.rows(), n = lv.cols();
    if (static_cast<int>(targets.size()) != m) {
        throw Error("cross_entropy: target count " + std::to_string(targets.size()) +
                    " does not match rows of " + shape_string(lv));
    }
    for (int t : targets) {
        if (t < 0 || t >= n) throw Error("cross_entropy: target index out of range");
    }
    Tensor out = Tensor::zeros({m});
    std::vector<double> lse(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double* row = &lv.data[static_cast<size_t>(i) * n];
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
        double l = mx + std::log(sum);
        lse[static_cast<size_t>(i)] = l;
        out.data[static_cast<size_t>(i)] = l - row[targets[static_cast<size_t>(i)]];
    }
    bool rg = node(logits).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, logits, targets, lse, m, n](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& L = g.node(logits).value;
            Tensor& da = GraphOps::grad_buf(g, logits);
            for (int i = 0; i < m; ++i) {
                double gi = G.data[static_cast<size_t>(i)];
                if (gi == 0.0) continue;
                const double* row = &L.data[static_cast<size_t>(i) * n];
                double* drow = &da.data[static_cast<size_t>(i) * n];
                double l = lse[static_cast<size_t>(i)];
                for (int j = 0; j < n; ++j) {
                    double p = std::exp(row[j] - l);
                    drow[j] += gi * p;
                }
                drow[targets[static_cast<size_t>(i)]] -= gi;
            }
        });
    }
    return out_v;
}

Var Graph::layer_conv(Var stack, Var kernel, Var bias) {
    const Tensor& xv = value(stack);
    const Tensor& kv = value(kernel);
    const Tensor& bv = value(bias);
    if (xv.rank() != 3) throw Error("layer_conv: stack must be rank-3, got " + shape_string(xv));
    if (kv.rank() != 2) throw Error("layer_conv: kernel must be rank-2, got " + shape_string(kv));
    int L = xv.shape[0], F = xv.shape[1], D = xv.shape[2];
    int C = kv.shape[0];
    if (kv.shape[1] != L) {
        throw Error("layer_conv: kernel length " + std::to_string(kv.shape[1]) +
                    " does not match layer count " + std::to_string(L));
    }
    if (bv.rank() != 1 || bv.shape[0] != C) shape_error("layer_conv", kv, bv);

    Tensor out = Tensor::zeros({F, C * D});
    for (int c = 0; c < C; ++c) {
        for (int l = 0; l < L; ++l) {
            double w = kv.at(c, l);
            const double* layer = &xv.data[static_cast<size_t>(l) * F * D];
            for (int f = 0; f < F; ++f) {
                double* orow = &out.data[static_cast<size_t>(f) * C * D + static_cast<size_t>(c) * D];
                const double* xrow = &layer[static_cast<size_t>(f) * D];
                for (int d = 0; d < D; ++d) orow[d] += w * xrow[d];
            }
        }
        double b = bv.at(c);
        for (int f = 0; f < F; ++f) {
            double* orow = &out.data[static_cast<size_t>(f) * C * D + static_cast<size_t>(c) * D];
            for (int d = 0; d < D; ++d) orow[d] += b;
        }
    }
    bool rg = node(stack).requires_grad || node(kernel).requires_grad || node(bias).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, stack, kernel, bias, L, F, D, C](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& X = g.node(stack).value;
            const Tensor& K = g.node(kernel).value;
            if (GraphOps::tracks(g, stack)) {
                Tensor& dx = GraphOps::grad_buf(g, stack);
                for (int c = 0; c < C; ++c) {
                    for (int l = 0; l < L; ++l) {
                        double w = K.at(c, l);
                        if (w == 0.0) continue;
                        for (int f = 0; f < F; ++f) {
                            const double* grow =
                                &G.data[static_cast<size_t>(f) * C * D + static_cast<size_t>(c) * D];
                            double* drow =
                                &dx.data[(static_cast<size_t>(l) * F + f) * D];
                            for (int d = 0; d < D; ++d) drow[d] += w * grow[d];
                        }
                    }
                }
            }
            if (GraphOps::tracks(g, kernel)) {
                Tensor& dk = GraphOps::grad_buf(g, kernel);
                for (int c = 0; c < C; ++c) {
                    for (int l = 0; l < L; ++l) {
                        double s = 0.0;
                        for (int f = 0; f < F; ++f) {
                            const double* grow =
                                &G.data[static_cast<size_t>(f) * C * D + static_cast<size_t>(c) * D];
                            const double* xrow = &X.data[(static_cast<size_t>(l) * F + f) * D];
                            for (int d = 0; d < D; ++d) s += grow[d] * xrow[d];
                        }
                        dk.data[static_cast<size_t>(c) * L + l] += s;
                    }
                }
            }
            if (GraphOps::tracks(g, bias)) {
                Tensor& db = GraphOps::grad_buf(g, bias);
                for (int c = 0; c < C; ++c) {
                    double s = 0.0;
                    for (int f = 0; f < F; ++f) {
                        const double* grow =
                            &G.data[static_cast<size_t>(f) * C * D + static_cast<size_t>(c) * D];
                        for (int d = 0; d < D; ++d) s += grow[d];
                    }
                    db.data[static_cast<size_t>(c)] += s;
                }
            }
        });
    }
    return out_v;
}

Var Graph::row_pair_dot(Var a, Var b, std::vector<int> rows) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[1]) {
        shape_error("row_pair_dot", av, bv);
    }
    int m = bv.shape[0], d = bv.shape[1];
    if (static_cast<int>(rows.size()) != m) {
        throw Error("row_pair_dot: row index count does not match rows of second operand");
    }
    for (int r : rows) {
        if (r < 0 || r >= av.shape[0]) throw Error("row_pair_dot: row index out of range");
    }
    Tensor out = Tensor::zeros({m});
    for (int k = 0; k < m; ++k) {
        const double* arow = &av.data[static_cast<size_t>(rows[static_cast<size_t>(k)]) * d];
        const double* brow = &bv.data[static_cast<size_t>(k) * d];
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += arow[j] * brow[j];
        out.data[static_cast<size_t>(k)] = s;
    }
    bool rg = node(a).requires_grad || node(b).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, a, b, rows, m, d](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            const Tensor& A = g.node(a).value;
            const Tensor& B = g.node(b).value;
            for (int k = 0; k < m; ++k) {
                double gk = G.data[static_cast<size_t>(k)];
                if (gk == 0.0) continue;
                size_t ai = static_cast<size_t>(rows[static_cast<size_t>(k)]) * d;
                size_t bi = static_cast<size_t>(k) * d;
                if (GraphOps::tracks(g, a)) {
                    Tensor& da = GraphOps::grad_buf(g, a);
                    for (int j = 0; j < d; ++j) da.data[ai + j] += gk * B.data[bi + j];
                }
                if (GraphOps::tracks(g, b)) {
                    Tensor& db = GraphOps::grad_buf(g, b);
                    for (int j = 0; j < d; ++j) db.data[bi + j] += gk * A.data[ai + j];
                }
            }
        });
    }
    return out_v;
}

Var Graph::scatter_replace(Var m, std::vector<std::pair<int, int>> coords, Var values) {
    const Tensor& mv = value(m);
    const Tensor& vv = value(values);
    if (mv.rank() != 2) throw Error("scatter_replace: matrix must be rank-2");
    if (vv.rank() != 1 || vv.shape[0] != static_cast<int>(coords.size())) {
        throw Error("scatter_replace: value count does not match coordinate count");
    }
    std::set<std::pair<int, int>> seen;
    for (auto [i, j] : coords) {
        if (i < 0 || i >= mv.shape[0] || j < 0 || j >= mv.shape[1]) {
            throw Error("scatter_replace: coordinate out of range");
        }
        if (!seen.insert({i, j}).second) throw Error("scatter_replace: duplicate coordinate");
    }
    Tensor out = mv;
    int n = mv.shape[1];
    for (size_t k = 0; k < coords.size(); ++k) {
        out.data[static_cast<size_t>(coords[k].first) * n + coords[k].second] = vv.data[k];
    }
    bool rg = node(m).requires_grad || node(values).requires_grad;
    Var out_v = emit(std::move(out), rg, nullptr);
    if (rg) {
        GraphOps::attach(*this, out_v, [out_v, m, values, coords, n](Graph& g) {
            const Tensor& G = g.node(out_v).grad;
            if (GraphOps::tracks(g, m)) {
                Tensor& dm = GraphOps::grad_buf(g, m);
                for (size_t i = 0; i < G.data.size(); ++i) dm.data[i] += G.data[i];
                // replaced entries pass no gradient to the original matrix
                for (auto [i, j] : coords) {
                    dm.data[static_cast<size_t>(i) * n + j] -= G.data[static_cast<size_t>(i) * n + j];
                }
            }
            if (GraphOps::tracks(g, values)) {
                Tensor& dv = GraphOps::grad_buf(g, values);
                for (size_t k = 0; k < coords.size(); ++k) {
                    dv.data[k] += G.data[static_cast<size_t>(coords[k].first) * n + coords[k].second];
                }
            }
        });
    }
    return out_v;
}

Var Graph::cosine_similarity_matrix(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.cols() != bv.cols()) shape_error("cosine_similarity_matrix", av, bv);
    return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& build,
                  const std::vector<Tensor>& points, double eps) {
    Graph g;
    std::vector<Var> vars;
    vars.reserve(points.size());
    for (const Tensor& p : points) vars.push_back(g.param(p));
    Var loss = build(g, vars);
    if (g.value(loss).size() != 1) throw Error("grad_check: loss must be scalar");
    g.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(vars.size());
    for (Var v : vars) analytic.push_back(g.grad(v));

    std::vector<Tensor> probe = points;
    auto eval = [&]() {
        Graph h;
        std::vector<Var> vs;
        vs.reserve(probe.size());
        for (const Tensor& p : probe) vs.push_back(h.param(p));
        return h.value(build(h, vs)).data[0];
    };

    double max_err = 0.0;
    for (size_t t = 0; t < probe.size(); ++t) {
        for (size_t i = 0; i < probe[t].data.size(); ++i) {
            double orig = probe[t].data[i];
            probe[t].data[i] = orig + eps;
            double f_plus = eval();
            probe[t].data[i] = orig - eps;
            double f_minus = eval();
            probe[t].data[i] = orig;
            double fd = (f_plus - f_minus) / (2.0 * eps);
            double ad = analytic[t].data[i];
            double err = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace ads::tensor
