#include "epf/tape.hpp"

#include <cmath>

#include "epf/error.hpp"

namespace epf {

TapeValue Tape::push(Matrix value, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Matrix(value.rows(), value.cols());
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return TapeValue{static_cast<int>(nodes_.size()) - 1};
}

TapeValue Tape::param(const Matrix& value, int param_id) {
  TapeValue v = push(value, {});
  params_.emplace_back(param_id, v.node);
  return v;
}

TapeValue Tape::constant(Matrix value) { return push(std::move(value), {}); }

TapeValue Tape::matmul(TapeValue a, TapeValue b) {
  Matrix c = epf::matmul(nodes_[a.node].value, nodes_[b.node].value);
  const int ia = a.node, ib = b.node;
  TapeValue out = push(std::move(c), {});
  const int io = out.node;
  nodes_[io].back = [ia, ib, io](Tape& t) {
    const Matrix& g = t.nodes_[io].grad;
    const Matrix& va = t.nodes_[ia].value;
    const Matrix& vb = t.nodes_[ib].value;
    t.grad_ref(ia) += epf::matmul(g, vb.transposed());
    t.grad_ref(ib) += epf::matmul(va.transposed(), g);
  };
  return out;
}

TapeValue Tape::add(TapeValue a, TapeValue b) {
  const Matrix& va = nodes_[a.node].value;
  const Matrix& vb = nodes_[b.node].value;
  if (!va.same_shape(vb)) fail(ErrorCode::ShapeMismatch, "tape add shape mismatch");
  Matrix c = va;
  c += vb;
  const int ia = a.node, ib = b.node;
  TapeValue out = push(std::move(c), {});
  const int io = out.node;
  nodes_[io].back = [ia, ib, io](Tape& t) {
    t.grad_ref(ia) += t.nodes_[io].grad;
    t.grad_ref(ib) += t.nodes_[io].grad;
  };
  return out;
}

TapeValue Tape::add_col_broadcast(TapeValue m, TapeValue col) {
  const Matrix& vm = nodes_[m.node].value;
  const Matrix& vc = nodes_[col.node].value;
  if (vc.cols() != 1 || vc.rows() != vm.rows())
    fail(ErrorCode::ShapeMismatch, "tape add_col_broadcast shape mismatch");
  Matrix c = vm;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += vc(i, 0);
  const int im = m.node, ic = col.node;
  TapeValue out = push(std::move(c), {});
  const int io = out.node;
  nodes_[io].back = [im, ic, io](Tape& t) {
    const Matrix& g = t.nodes_[io].grad;
    t.grad_ref(im) += g;
    Matrix& gc = t.grad_ref(ic);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j);
      gc(i, 0) += s;
    }
  };
  return out;
}

TapeValue Tape::relu(TapeValue a) {
  Matrix c = nodes_[a.node].value;
  for (std::size_t k = 0; k < c.size(); ++k)
    if (c.at_flat(k) < 0.0) c.at_flat(k) = 0.0;
  const int ia = a.node;
  TapeValue out = push(std::move(c), {});
  const int io = out.node;
  nodes_[io].back = [ia, io](Tape& t) {
    const Matrix& g = t.nodes_[io].grad;
    const Matrix& x = t.nodes_[ia].value;
    Matrix& ga = t.grad_ref(ia);
    for (std::size_t k = 0; k < g.size(); ++k)
      if (x.at_flat(k) > 0.0) ga.at_flat(k) += g.at_flat(k);
  };
  return out;
}

TapeValue Tape::mul_mask(TapeValue a, Matrix mask) {
  const Matrix& va = nodes_[a.node].value;
  if (!va.same_shape(mask)) fail(ErrorCode::ShapeMismatch, "tape mul_mask shape mismatch");
  Matrix c = hadamard(va, mask);
  const int ia = a.node;
  TapeValue out = push(std::move(c), {});
  const int io = out.node;
  nodes_[io].back = [ia, io, m = std::move(mask)](Tape& t) {
    const Matrix& g = t.nodes_[io].grad;
    Matrix& ga = t.grad_ref(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.at_flat(k) += g.at_flat(k) * m.at_flat(k);
  };
  return out;
}

TapeValue Tape::lem_rows(TapeValue coef, Matrix design) {
  const Matrix& b = nodes_[coef.node].value;
  const std::size_t hours = b.rows();
  const std::size_t p = b.cols() - 1;
  if (design.cols() != p || design.rows() % hours != 0)
    fail(ErrorCode::ShapeMismatch, "tape lem_rows shape mismatch");
  const std::size_t n = design.rows() / hours;
  Matrix c(hours, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < hours; ++s) {
      double v = b(s, 0);
      const double* xr = design.data() + (i * hours + s) * p;
      for (std::size_t j = 0; j < p; ++j) v += b(s, j + 1) * xr[j];
      c(s, i) = v;
    }
  const int ib = coef.node;
  TapeValue out = push(std::move(c), {});
  const int io = out.node;
  nodes_[io].back = [ib, io, x = std::move(design), hours, p, n](Tape& t) {
    const Matrix& g = t.nodes_[io].grad;
    Matrix& gb = t.grad_ref(ib);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < hours; ++s) {
        const double gs = g(s, i);
        if (gs == 0.0) continue;
        gb(s, 0) += gs;
        const double* xr = x.data() + (i * hours + s) * p;
        for (std::size_t j = 0; j < p; ++j) gb(s, j + 1) += gs * xr[j];
      }
  };
  return out;
}

TapeValue Tape::sum_sq_diff(TapeValue pred, Matrix target) {
  const Matrix& vp = nodes_[pred.node].value;
  if (!vp.same_shape(target)) fail(ErrorCode::ShapeMismatch, "tape sum_sq_diff shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < vp.size(); ++k) {
    const double d = vp.at_flat(k) - target.at_flat(k);
    s += d * d;
  }
  const int ip = pred.node;
  TapeValue out = push(Matrix{{s}}, {});
  const int io = out.node;
  nodes_[io].back = [ip, io, tgt = std::move(target)](Tape& t) {
    const double g = t.nodes_[io].grad(0, 0);
    const Matrix& vp = t.nodes_[ip].value;
    Matrix& gp = t.grad_ref(ip);
    for (std::size_t k = 0; k < vp.size(); ++k)
      gp.at_flat(k) += 2.0 * g * (vp.at_flat(k) - tgt.at_flat(k));
  };
  return out;
}

TapeValue Tape::l1_norm(TapeValue a, std::size_t skip_cols) {
  const Matrix& va = nodes_[a.node].value;
  double s = 0.0;
  for (std::size_t i = 0; i < va.rows(); ++i)
    for (std::size_t j = skip_cols; j < va.cols(); ++j) s += std::fabs(va(i, j));
  const int ia = a.node;
  TapeValue out = push(Matrix{{s}}, {});
  const int io = out.node;
  nodes_[io].back = [ia, io, skip_cols](Tape& t) {
    const double g = t.nodes_[io].grad(0, 0);
    const Matrix& x = t.nodes_[ia].value;
    Matrix& ga = t.grad_ref(ia);
    // subgradient at 0 is taken as 0
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = skip_cols; j < x.cols(); ++j) {
        const double v = x(i, j);
        if (v > 0.0)
          ga(i, j) += g;
        else if (v < 0.0)
          ga(i, j) -= g;
      }
  };
  return out;
}

TapeValue Tape::scale(TapeValue a, double c) {
  Matrix v = nodes_[a.node].value;
  v *= c;
  const int ia = a.node;
  TapeValue out = push(std::move(v), {});
  const int io = out.node;
  nodes_[io].back = [ia, io, c](Tape& t) {
    const Matrix& g = t.nodes_[io].grad;
    Matrix& ga = t.grad_ref(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.at_flat(k) += c * g.at_flat(k);
  };
  return out;
}

void Tape::backward(TapeValue loss) {
  if (!loss.valid()) return;
  Node& top = nodes_[loss.node];
  if (top.value.rows() != 1 || top.value.cols() != 1)
    fail(ErrorCode::ShapeMismatch, "backward: loss must be scalar");
  top.grad(0, 0) = 1.0;
  for (int i = loss.node; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

std::map<int, Matrix> Tape::parameter_grads() const {
  std::map<int, Matrix> out;
  for (const auto& [id, node] : params_) out[id] = nodes_[node].grad;
  return out;
}

std::map<int, Matrix> grad_backward(Tape& tape, TapeValue loss) {
  tape.backward(loss);
  return tape.parameter_grads();
}

}  // namespace epf
