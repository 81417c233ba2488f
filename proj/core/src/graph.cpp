#include "narsal/graph.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace narsal {

namespace {

constexpr double kGeluCoeff = 0.044715;

} // namespace

Graph::Node& Graph::node(NodeId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::out_of_range("Graph: invalid node id " + std::to_string(id));
    }
    return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::node(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::out_of_range("Graph: invalid node id " + std::to_string(id));
    }
    return nodes_[static_cast<std::size_t>(id)];
}

const Tensor& Graph::grad(NodeId id) const {
    const Node& n = node(id);
    if (!n.requires_grad) {
        throw std::logic_error("Graph::grad: node does not require grad");
    }
    if (!backward_done_) {
        throw std::logic_error("Graph::grad: backward() has not run");
    }
    return n.grad;
}

NodeId Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&, NodeId)> back) {
    Node n;
    n.requires_grad = requires_grad && recording_;
    if (n.requires_grad) {
        n.grad = Tensor(value.shape, 0.0);
        n.back = std::move(back);
    }
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor t) {
    const bool rg = t.requires_grad;
    return push(std::move(t), rg, nullptr);
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(A.shape) + " vs " +
                                    shape_str(B.shape));
    }
    const int m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C({m, n}, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = &A.data[static_cast<std::size_t>(i) * k];
        double* crow = &C.data[static_cast<std::size_t>(i) * n];
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = &B.data[static_cast<std::size_t>(p) * n];
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    const bool na = track(a), nb = track(b);
    if (!na && !nb) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, b, na, nb, m, k, n](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        if (na) {
            const Tensor& B = g.value(b);
            Tensor& dA = g.grad_buf(a);
            // dA += dC * B^T
            for (int i = 0; i < m; ++i) {
                const double* dcrow = &dC.data[static_cast<std::size_t>(i) * n];
                double* darow = &dA.data[static_cast<std::size_t>(i) * k];
                for (int p = 0; p < k; ++p) {
                    const double* brow = &B.data[static_cast<std::size_t>(p) * n];
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += dcrow[j] * brow[j];
                    darow[p] += s;
                }
            }
        }
        if (nb) {
            const Tensor& A = g.value(a);
            Tensor& dB = g.grad_buf(b);
            // dB += A^T * dC
            for (int i = 0; i < m; ++i) {
                const double* arow = &A.data[static_cast<std::size_t>(i) * k];
                const double* dcrow = &dC.data[static_cast<std::size_t>(i) * n];
                for (int p = 0; p < k; ++p) {
                    const double av = arow[p];
                    if (av == 0.0) continue;
                    double* dbrow = &dB.data[static_cast<std::size_t>(p) * n];
                    for (int j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
                }
            }
        }
    });
}

NodeId Graph::transpose(NodeId a) {
    const Tensor& A = value(a);
    if (A.rank() != 2) {
        throw std::invalid_argument("transpose: rank-2 required, shape is " + shape_str(A.shape));
    }
    const int m = A.rows(), n = A.cols();
    Tensor T({n, m}, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) T.at(j, i) = A.at(i, j);
    }
    if (!track(a)) return push(std::move(T), false, nullptr);
    return push(std::move(T), true, [a, m, n](Graph& g, NodeId self) {
        const Tensor& dT = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) dA.at(i, j) += dT.at(j, i);
        }
    });
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_same_shape(A, B, "add");
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
    const bool na = track(a), nb = track(b);
    if (!na && !nb) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, b, na, nb](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        if (na) {
            Tensor& dA = g.grad_buf(a);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += dC.data[i];
        }
        if (nb) {
            Tensor& dB = g.grad_buf(b);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dB.data[i] += dC.data[i];
        }
    });
}

NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_same_shape(A, B, "sub");
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] -= B.data[i];
    const bool na = track(a), nb = track(b);
    if (!na && !nb) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, b, na, nb](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        if (na) {
            Tensor& dA = g.grad_buf(a);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += dC.data[i];
        }
        if (nb) {
            Tensor& dB = g.grad_buf(b);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dB.data[i] -= dC.data[i];
        }
    });
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_same_shape(A, B, "mul");
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
    const bool na = track(a), nb = track(b);
    if (!na && !nb) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, b, na, nb](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        if (na) {
            const Tensor& B = g.value(b);
            Tensor& dA = g.grad_buf(a);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += dC.data[i] * B.data[i];
        }
        if (nb) {
            const Tensor& A = g.value(a);
            Tensor& dB = g.grad_buf(b);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dB.data[i] += dC.data[i] * A.data[i];
        }
    });
}

NodeId Graph::scale(NodeId a, double c) {
    Tensor C = value(a);
    for (double& v : C.data) v *= c;
    if (!track(a)) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, c](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += c * dC.data[i];
    });
}

NodeId Graph::add_row_vector(NodeId a, NodeId v) {
    const Tensor& A = value(a);
    const Tensor& V = value(v);
    if (A.rank() != 2 || V.rank() != 1 || V.shape[0] != A.cols()) {
        throw std::invalid_argument("add_row_vector: shapes " + shape_str(A.shape) + " vs " +
                                    shape_str(V.shape));
    }
    const int m = A.rows(), n = A.cols();
    Tensor C = A;
    for (int i = 0; i < m; ++i) {
        double* crow = &C.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) crow[j] += V.data[static_cast<std::size_t>(j)];
    }
    const bool na = track(a), nv = track(v);
    if (!na && !nv) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, v, na, nv, m, n](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        if (na) {
            Tensor& dA = g.grad_buf(a);
            for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += dC.data[i];
        }
        if (nv) {
            Tensor& dV = g.grad_buf(v);
            for (int i = 0; i < m; ++i) {
                const double* dcrow = &dC.data[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) dV.data[static_cast<std::size_t>(j)] += dcrow[j];
            }
        }
    });
}

NodeId Graph::mul_row_vector(NodeId a, NodeId v) {
    const Tensor& A = value(a);
    const Tensor& V = value(v);
    if (A.rank() != 2 || V.rank() != 1 || V.shape[0] != A.cols()) {
        throw std::invalid_argument("mul_row_vector: shapes " + shape_str(A.shape) + " vs " +
                                    shape_str(V.shape));
    }
    const int m = A.rows(), n = A.cols();
    Tensor C = A;
    for (int i = 0; i < m; ++i) {
        double* crow = &C.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) crow[j] *= V.data[static_cast<std::size_t>(j)];
    }
    const bool na = track(a), nv = track(v);
    if (!na && !nv) return push(std::move(C), false, nullptr);
    return push(std::move(C), true, [a, v, na, nv, m, n](Graph& g, NodeId self) {
        const Tensor& dC = g.node(self).grad;
        const Tensor& A = g.value(a);
        const Tensor& V = g.value(v);
        if (na) {
            Tensor& dA = g.grad_buf(a);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    dA.at(i, j) += dC.at(i, j) * V.data[static_cast<std::size_t>(j)];
                }
            }
        }
        if (nv) {
            Tensor& dV = g.grad_buf(v);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    dV.data[static_cast<std::size_t>(j)] += dC.at(i, j) * A.at(i, j);
                }
            }
        }
    });
}

NodeId Graph::softmax_rows(NodeId a) {
    const Tensor& A = value(a);
    if (A.rank() != 2) {
        throw std::invalid_argument("softmax_rows: rank-2 required, shape is " +
                                    shape_str(A.shape));
    }
    const int m = A.rows(), n = A.cols();
    Tensor S({m, n}, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* x = &A.data[static_cast<std::size_t>(i) * n];
        double* s = &S.data[static_cast<std::size_t>(i) * n];
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            s[j] = std::exp(x[j] - mx);
            z += s[j];
        }
        for (int j = 0; j < n; ++j) s[j] /= z;
    }
    if (!track(a)) return push(std::move(S), false, nullptr);
    return push(std::move(S), true, [a, m, n](Graph& g, NodeId self) {
        const Tensor& S = g.node(self).value;
        const Tensor& dS = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            const double* s = &S.data[static_cast<std::size_t>(i) * n];
            const double* ds = &dS.data[static_cast<std::size_t>(i) * n];
            double* da = &dA.data[static_cast<std::size_t>(i) * n];
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += ds[j] * s[j];
            for (int j = 0; j < n; ++j) da[j] += s[j] * (ds[j] - dot);
        }
    });
}

NodeId Graph::layer_norm_rows(NodeId a, double eps) {
    const Tensor& A = value(a);
    if (A.rank() != 2) {
        throw std::invalid_argument("layer_norm_rows: rank-2 required, shape is " +
                                    shape_str(A.shape));
    }
    const int m = A.rows(), n = A.cols();
    Tensor Y({m, n}, 0.0);
    std::vector<double> inv_std(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double* x = &A.data[static_cast<std::size_t>(i) * n];
        double* y = &Y.data[static_cast<std::size_t>(i) * n];
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += x[j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x[j] - mu;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = inv;
        for (int j = 0; j < n; ++j) y[j] = (x[j] - mu) * inv;
    }
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, m, n, inv_std = std::move(inv_std)](Graph& g, NodeId self) {
        const Tensor& Y = g.node(self).value;
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            const double* y = &Y.data[static_cast<std::size_t>(i) * n];
            const double* dy = &dY.data[static_cast<std::size_t>(i) * n];
            double* da = &dA.data[static_cast<std::size_t>(i) * n];
            const double inv = inv_std[static_cast<std::size_t>(i)];
            double mean_dy = 0.0, mean_dyy = 0.0;
            for (int j = 0; j < n; ++j) {
                mean_dy += dy[j];
                mean_dyy += dy[j] * y[j];
            }
            mean_dy /= n;
            mean_dyy /= n;
            for (int j = 0; j < n; ++j) {
                da[j] += inv * (dy[j] - mean_dy - y[j] * mean_dyy);
            }
        }
    });
}

NodeId Graph::gelu(NodeId a) {
    const Tensor& A = value(a);
    Tensor Y = A;
    const double c = std::sqrt(2.0 / std::numbers::pi);
    for (double& v : Y.data) {
        const double u = c * (v + kGeluCoeff * v * v * v);
        v = 0.5 * v * (1.0 + std::tanh(u));
    }
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, c](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        const Tensor& A = g.value(a);
        Tensor& dA = g.grad_buf(a);
        for (std::size_t i = 0; i < dY.data.size(); ++i) {
            const double x = A.data[i];
            const double u = c * (x + kGeluCoeff * x * x * x);
            const double t = std::tanh(u);
            const double du = c * (1.0 + 3.0 * kGeluCoeff * x * x);
            const double dgdx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            dA.data[i] += dY.data[i] * dgdx;
        }
    });
}

NodeId Graph::tanh_act(NodeId a) {
    Tensor Y = value(a);
    for (double& v : Y.data) v = std::tanh(v);
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a](Graph& g, NodeId self) {
        const Tensor& Y = g.node(self).value;
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (std::size_t i = 0; i < dY.data.size(); ++i) {
            dA.data[i] += dY.data[i] * (1.0 - Y.data[i] * Y.data[i]);
        }
    });
}

NodeId Graph::dropout(NodeId a, double p, RngStream* stream, bool train) {
    if (p < 0.0 || p >= 1.0) {
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) {
        // Identity; the stream is not consumed.
        Tensor Y = value(a);
        if (!track(a)) return push(std::move(Y), false, nullptr);
        return push(std::move(Y), true, [a](Graph& g, NodeId self) {
            const Tensor& dY = g.node(self).grad;
            Tensor& dA = g.grad_buf(a);
            for (std::size_t i = 0; i < dY.data.size(); ++i) dA.data[i] += dY.data[i];
        });
    }
    if (stream == nullptr) {
        throw std::invalid_argument("dropout: train mode with p>0 requires a random stream");
    }
    const Tensor& A = value(a);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(A.data.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = (stream->next_unit() >= p) ? keep_scale : 0.0;
    }
    Tensor Y = A;
    for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= mask[i];
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, mask = std::move(mask)](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (std::size_t i = 0; i < dY.data.size(); ++i) dA.data[i] += dY.data[i] * mask[i];
    });
}

NodeId Graph::gather_rows(NodeId a, std::vector<int> rows) {
    const Tensor& A = value(a);
    if (A.rank() != 2) {
        throw std::invalid_argument("gather_rows: rank-2 required, shape is " +
                                    shape_str(A.shape));
    }
    if (rows.empty()) {
        throw std::invalid_argument("gather_rows: empty index set");
    }
    const int n = A.cols();
    for (int r : rows) {
        if (r < 0 || r >= A.rows()) {
            throw std::invalid_argument("gather_rows: index " + std::to_string(r) +
                                        " out of range for " + shape_str(A.shape));
        }
    }
    Tensor Y({static_cast<int>(rows.size()), n}, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = &A.data[static_cast<std::size_t>(rows[i]) * n];
        double* dst = &Y.data[i * static_cast<std::size_t>(n)];
        for (int j = 0; j < n; ++j) dst[j] = src[j];
    }
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, n, rows = std::move(rows)](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double* src = &dY.data[i * static_cast<std::size_t>(n)];
            double* dst = &dA.data[static_cast<std::size_t>(rows[i]) * n];
            for (int j = 0; j < n; ++j) dst[j] += src[j];
        }
    });
}

NodeId Graph::mean_rows(NodeId a, std::vector<int> rows) {
    const Tensor& A = value(a);
    if (A.rank() != 2) {
        throw std::invalid_argument("mean_rows: rank-2 required, shape is " + shape_str(A.shape));
    }
    if (rows.empty()) {
        throw std::invalid_argument("mean_rows: empty index set");
    }
    const int n = A.cols();
    for (int r : rows) {
        if (r < 0 || r >= A.rows()) {
            throw std::invalid_argument("mean_rows: index " + std::to_string(r) +
                                        " out of range for " + shape_str(A.shape));
        }
    }
    Tensor Y({n}, 0.0);
    for (int r : rows) {
        const double* src = &A.data[static_cast<std::size_t>(r) * n];
        for (int j = 0; j < n; ++j) Y.data[static_cast<std::size_t>(j)] += src[j];
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& v : Y.data) v *= inv;
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, n, inv, rows = std::move(rows)](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (int r : rows) {
            double* dst = &dA.data[static_cast<std::size_t>(r) * n];
            for (int j = 0; j < n; ++j) dst[j] += inv * dY.data[static_cast<std::size_t>(j)];
        }
    });
}

NodeId Graph::slice_cols(NodeId a, int c0, int c1) {
    const Tensor& A = value(a);
    if (A.rank() != 2 || c0 < 0 || c1 > A.cols() || c0 >= c1) {
        throw std::invalid_argument("slice_cols: bad slice [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") of " + shape_str(A.shape));
    }
    const int m = A.rows(), n = A.cols(), w = c1 - c0;
    Tensor Y({m, w}, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* src = &A.data[static_cast<std::size_t>(i) * n + c0];
        double* dst = &Y.data[static_cast<std::size_t>(i) * w];
        for (int j = 0; j < w; ++j) dst[j] = src[j];
    }
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, c0, m, n, w](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        for (int i = 0; i < m; ++i) {
            const double* src = &dY.data[static_cast<std::size_t>(i) * w];
            double* dst = &dA.data[static_cast<std::size_t>(i) * n + c0];
            for (int j = 0; j < w; ++j) dst[j] += src[j];
        }
    });
}

NodeId Graph::concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_cols: no inputs");
    }
    const int m = value(parts[0]).rows();
    int total = 0;
    bool any = false;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        if (t.rank() != 2 || t.rows() != m) {
            throw std::invalid_argument("concat_cols: row mismatch " + shape_str(t.shape));
        }
        total += t.cols();
        any = any || track(p);
    }
    Tensor Y({m, total}, 0.0);
    int off = 0;
    for (NodeId p : parts) {
        const Tensor& t = value(p);
        const int w = t.cols();
        for (int i = 0; i < m; ++i) {
            const double* src = &t.data[static_cast<std::size_t>(i) * w];
            double* dst = &Y.data[static_cast<std::size_t>(i) * total + off];
            for (int j = 0; j < w; ++j) dst[j] = src[j];
        }
        off += w;
    }
    if (!any) return push(std::move(Y), false, nullptr);
    std::vector<NodeId> ids(parts.begin(), parts.end());
    return push(std::move(Y), true, [ids = std::move(ids), m, total](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        int off = 0;
        for (NodeId p : ids) {
            const int w = g.value(p).cols();
            if (g.node(p).requires_grad) {
                Tensor& dP = g.grad_buf(p);
                for (int i = 0; i < m; ++i) {
                    const double* src = &dY.data[static_cast<std::size_t>(i) * total + off];
                    double* dst = &dP.data[static_cast<std::size_t>(i) * w];
                    for (int j = 0; j < w; ++j) dst[j] += src[j];
                }
            }
            off += w;
        }
    });
}

NodeId Graph::stack(std::span<const NodeId> scalars) {
    if (scalars.empty()) {
        throw std::invalid_argument("stack: no inputs");
    }
    Tensor Y({static_cast<int>(scalars.size())}, 0.0);
    bool any = false;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        const Tensor& t = value(scalars[i]);
        if (t.size() != 1) {
            throw std::invalid_argument("stack: input " + std::to_string(i) + " has shape " +
                                        shape_str(t.shape));
        }
        Y.data[i] = t.data[0];
        any = any || track(scalars[i]);
    }
    if (!any) return push(std::move(Y), false, nullptr);
    std::vector<NodeId> ids(scalars.begin(), scalars.end());
    return push(std::move(Y), true, [ids = std::move(ids)](Graph& g, NodeId self) {
        const Tensor& dY = g.node(self).grad;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (g.node(ids[i]).requires_grad) {
                g.grad_buf(ids[i]).data[0] += dY.data[i];
            }
        }
    });
}

NodeId Graph::sum_all(NodeId a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (double v : A.data) s += v;
    if (!track(a)) return push(Tensor::scalar(s), false, nullptr);
    return push(Tensor::scalar(s), true, [a](Graph& g, NodeId self) {
        const double d = g.node(self).grad.data[0];
        Tensor& dA = g.grad_buf(a);
        for (double& v : dA.data) v += d;
    });
}

NodeId Graph::mean_all(NodeId a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (double v : A.data) s += v;
    const double inv = 1.0 / static_cast<double>(A.data.size());
    if (!track(a)) return push(Tensor::scalar(s * inv), false, nullptr);
    return push(Tensor::scalar(s * inv), true, [a, inv](Graph& g, NodeId self) {
        const double d = g.node(self).grad.data[0] * inv;
        Tensor& dA = g.grad_buf(a);
        for (double& v : dA.data) v += d;
    });
}

NodeId Graph::l2_normalize(NodeId a) {
    const Tensor& A = value(a);
    if (A.rank() != 1) {
        throw std::invalid_argument("l2_normalize: rank-1 required, shape is " +
                                    shape_str(A.shape));
    }
    double norm_sq = 0.0;
    for (double v : A.data) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
        throw std::invalid_argument("l2_normalize: zero vector");
    }
    Tensor Y = A;
    for (double& v : Y.data) v /= norm;
    if (!track(a)) return push(std::move(Y), false, nullptr);
    return push(std::move(Y), true, [a, norm](Graph& g, NodeId self) {
        const Tensor& Y = g.node(self).value;
        const Tensor& dY = g.node(self).grad;
        Tensor& dA = g.grad_buf(a);
        double dot = 0.0;
        for (std::size_t i = 0; i < dY.data.size(); ++i) dot += dY.data[i] * Y.data[i];
        for (std::size_t i = 0; i < dY.data.size(); ++i) {
            dA.data[i] += (dY.data[i] - Y.data[i] * dot) / norm;
        }
    });
}

NodeId Graph::dot(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 1 || B.rank() != 1 || A.shape != B.shape) {
        throw std::invalid_argument("dot: shapes " + shape_str(A.shape) + " vs " +
                                    shape_str(B.shape));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < A.data.size(); ++i) s += A.data[i] * B.data[i];
    const bool na = track(a), nb = track(b);
    if (!na && !nb) return push(Tensor::scalar(s), false, nullptr);
    return push(Tensor::scalar(s), true, [a, b, na, nb](Graph& g, NodeId self) {
        const double d = g.node(self).grad.data[0];
        if (na) {
            const Tensor& B = g.value(b);
            Tensor& dA = g.grad_buf(a);
            for (std::size_t i = 0; i < dA.data.size(); ++i) dA.data[i] += d * B.data[i];
        }
        if (nb) {
            const Tensor& A = g.value(a);
            Tensor& dB = g.grad_buf(b);
            for (std::size_t i = 0; i < dB.data.size(); ++i) dB.data[i] += d * A.data[i];
        }
    });
}

NodeId Graph::cross_entropy_vec(NodeId logits, int target) {
    const Tensor& L = value(logits);
    if (L.rank() != 1) {
        throw std::invalid_argument("cross_entropy_vec: rank-1 required, shape is " +
                                    shape_str(L.shape));
    }
    const int k = L.shape[0];
    if (target < 0 || target >= k) {
        throw std::invalid_argument("cross_entropy_vec: target " + std::to_string(target) +
                                    " out of range for " + shape_str(L.shape));
    }
    double mx = L.data[0];
    for (double v : L.data) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : L.data) z += std::exp(v - mx);
    const double loss = mx + std::log(z) - L.data[static_cast<std::size_t>(target)];
    if (!track(logits)) return push(Tensor::scalar(loss), false, nullptr);
    return push(Tensor::scalar(loss), true, [logits, target, mx, z](Graph& g, NodeId self) {
        const double d = g.node(self).grad.data[0];
        const Tensor& L = g.value(logits);
        Tensor& dL = g.grad_buf(logits);
        for (std::size_t i = 0; i < L.data.size(); ++i) {
            const double p = std::exp(L.data[i] - mx) / z;
            dL.data[i] += d * (p - (static_cast<int>(i) == target ? 1.0 : 0.0));
        }
    });
}

NodeId Graph::cross_entropy_rows(NodeId logits, std::vector<int> targets) {
    const Tensor& L = value(logits);
    if (L.rank() != 2 || static_cast<std::size_t>(L.rows()) != targets.size()) {
        throw std::invalid_argument("cross_entropy_rows: logits " + shape_str(L.shape) + " vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    const int m = L.rows(), n = L.cols();
    for (int t : targets) {
        if (t < 0 || t >= n) {
            throw std::invalid_argument("cross_entropy_rows: target " + std::to_string(t) +
                                        " out of range for " + shape_str(L.shape));
        }
    }
    std::vector<double> maxes(static_cast<std::size_t>(m)), zs(static_cast<std::size_t>(m));
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        const double* x = &L.data[static_cast<std::size_t>(i) * n];
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(x[j] - mx);
        maxes[static_cast<std::size_t>(i)] = mx;
        zs[static_cast<std::size_t>(i)] = z;
        total += mx + std::log(z) - x[targets[static_cast<std::size_t>(i)]];
    }
    const double loss = total / m;
    if (!track(logits)) return push(Tensor::scalar(loss), false, nullptr);
    return push(Tensor::scalar(loss), true,
                [logits, m, n, targets = std::move(targets), maxes = std::move(maxes),
                 zs = std::move(zs)](Graph& g, NodeId self) {
                    const double d = g.node(self).grad.data[0] / m;
                    const Tensor& L = g.value(logits);
                    Tensor& dL = g.grad_buf(logits);
                    for (int i = 0; i < m; ++i) {
                        const double* x = &L.data[static_cast<std::size_t>(i) * n];
                        double* dx = &dL.data[static_cast<std::size_t>(i) * n];
                        const double mx = maxes[static_cast<std::size_t>(i)];
                        const double z = zs[static_cast<std::size_t>(i)];
                        const int t = targets[static_cast<std::size_t>(i)];
                        for (int j = 0; j < n; ++j) {
                            const double p = std::exp(x[j] - mx) / z;
                            dx[j] += d * (p - (j == t ? 1.0 : 0.0));
                        }
                    }
                });
}

NodeId Graph::cosine(NodeId a, NodeId b) {
    return dot(l2_normalize(a), l2_normalize(b));
}

void Graph::backward(NodeId loss) {
    if (!recording_) {
        throw std::logic_error("Graph::backward: graph is not recording");
    }
    if (backward_done_) {
        throw std::logic_error("Graph::backward: graph already traversed once");
    }
    const Node& l = node(loss);
    if (l.value.size() != 1) {
        throw std::invalid_argument("Graph::backward: loss must be scalar, shape is " +
                                    shape_str(l.value.shape));
    }
    if (!std::isfinite(l.value.data[0])) {
        throw std::invalid_argument("Graph::backward: loss is not finite");
    }
    if (!l.requires_grad) {
        throw std::logic_error("Graph::backward: loss does not depend on any tracked tensor");
    }
    backward_done_ = true;
    node(loss).grad.data[0] = 1.0;
    for (NodeId i = static_cast<NodeId>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.requires_grad && n.back) {
            n.back(*this, i);
        }
    }
}

} // namespace narsal
