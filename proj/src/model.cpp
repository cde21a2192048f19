#include "epf/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "epf/error.hpp"
#include "epf/ols.hpp"

namespace epf::model {

Arch arch_from_string(const std::string& s) {
  if (s == "rnn") return Arch::rnn;
  if (s == "kf") return Arch::kf;
  if (s == "lem") return Arch::lem;
  if (s == "lem-rnn") return Arch::lem_rnn;
  if (s == "kf-rnn") return Arch::kf_rnn;
  if (s == "lem-kf-rnn") return Arch::lem_kf_rnn;
  fail(ErrorCode::ParseError, "unknown architecture '" + s + "'");
}

std::string to_string(Arch a) {
  switch (a) {
    case Arch::rnn: return "rnn";
    case Arch::kf: return "kf";
    case Arch::lem: return "lem";
    case Arch::lem_rnn: return "lem-rnn";
    case Arch::kf_rnn: return "kf-rnn";
    case Arch::lem_kf_rnn: return "lem-kf-rnn";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (hidden < 1 || hidden > 128) fail(ErrorCode::RangeError, "hidden size outside [1, 128]");
  if (seq_len < 1 || seq_len > 7) fail(ErrorCode::RangeError, "sequence length outside [1, 7]");
  if (dropout < 0.0 || dropout > 0.5) fail(ErrorCode::RangeError, "dropout outside [0, 0.5]");
  if (ols_scale < 0.0 || ols_scale > 2.0) fail(ErrorCode::RangeError, "alpha outside [0, 2]");
  if ((has_rnn(arch) || has_kf(arch)) && rnn_width < 1)
    fail(ErrorCode::RangeError, "rnn_width not set");
  if (has_lem(arch) && lin_width < 1) fail(ErrorCode::RangeError, "lin_width not set");
}

bool ModelState::all_finite() const {
  for (const Matrix* m : {&w_hid, &w_ext, &b_hid, &w_out, &b_out, &a_hid, &a_ext, &b_hid_kf,
                          &a_out, &b_out_kf, &lem})
    if (!m->all_finite()) return false;
  return true;
}

const char* param_name(Param p) {
  switch (p) {
    case Param::w_hid: return "w_hid";
    case Param::w_ext: return "w_ext";
    case Param::b_hid: return "b_hid";
    case Param::w_out: return "w_out";
    case Param::b_out: return "b_out";
    case Param::a_hid: return "a_hid";
    case Param::a_ext: return "a_ext";
    case Param::b_hid_kf: return "b_hid_kf";
    case Param::a_out: return "a_out";
    case Param::b_out_kf: return "b_out_kf";
    case Param::lem: return "lem";
  }
  return "?";
}

bool is_output_side(Param p) {
  return p == Param::w_out || p == Param::a_out || p == Param::lem;
}

namespace {

// Shared Elman cell loop; identical arithmetic for both recurrent branches.
std::pair<Matrix, Matrix> recurrent_forward(const Matrix& w_hid, const Matrix& w_ext,
                                            const Matrix& b_hid, const Matrix& w_out,
                                            const Matrix& b_out, const Matrix& seq,
                                            const Matrix& hidden_in, Activation act,
                                            const Matrix* dropout_mask) {
  const std::size_t hid = w_hid.rows();
  const std::size_t width = w_ext.cols();
  if (seq.cols() != width) fail(ErrorCode::ShapeMismatch, "sequence width != W_ext columns");
  if (hidden_in.rows() != hid || hidden_in.cols() != 1)
    fail(ErrorCode::ShapeMismatch, "hidden state size mismatch");

  Matrix h = hidden_in;
  for (std::size_t u = 0; u < seq.rows(); ++u) {
    Matrix x(width, 1);
    for (std::size_t j = 0; j < width; ++j) x(j, 0) = seq(u, j);
    Matrix z = matmul(w_hid, h);
    z += matmul(w_ext, x);
    z += b_hid;
    if (act == Activation::relu)
      for (std::size_t k = 0; k < z.size(); ++k)
        if (z.at_flat(k) < 0.0) z.at_flat(k) = 0.0;
    h = std::move(z);
  }
  Matrix h_out = h;
  if (dropout_mask) {
    if (!dropout_mask->same_shape(h_out))
      fail(ErrorCode::ShapeMismatch, "dropout mask shape mismatch");
    h_out = hadamard(h_out, *dropout_mask);
  }
  Matrix y = matmul(w_out, h_out);
  y += b_out;
  return {std::move(y), std::move(h)};
}

}  // namespace

std::pair<Matrix, Matrix> rnn_forward(const ModelSpec& spec, const ModelState& state,
                                      const Matrix& seq, const Matrix& hidden_in, Activation act,
                                      const Matrix* dropout_mask) {
  (void)spec;
  return recurrent_forward(state.w_hid, state.w_ext, state.b_hid, state.w_out, state.b_out, seq,
                           hidden_in, act, dropout_mask);
}

std::pair<Matrix, Matrix> kf_forward(const ModelSpec& spec, const ModelState& state,
                                     const Matrix& seq, const Matrix& hidden_in,
                                     const Matrix* dropout_mask) {
  (void)spec;
  return recurrent_forward(state.a_hid, state.a_ext, state.b_hid_kf, state.a_out, state.b_out_kf,
                           seq, hidden_in, Activation::identity, dropout_mask);
}

Matrix lem_forward(const ModelSpec& spec, const ModelState& state, const Matrix& lem_rows) {
  const std::size_t p = static_cast<std::size_t>(spec.lin_width);
  if (state.lem.cols() != p + 1 || state.lem.rows() != 24)
    fail(ErrorCode::ShapeMismatch, "lem coefficient block shape mismatch");
  if (lem_rows.rows() != 24 || lem_rows.cols() != p)
    fail(ErrorCode::ShapeMismatch, "lem design rows shape mismatch");
  Matrix y(24, 1);
  for (std::size_t s = 0; s < 24; ++s) {
    double v = state.lem(s, 0);
    for (std::size_t j = 0; j < p; ++j) v += state.lem(s, j + 1) * lem_rows(s, j);
    y(s, 0) = v;
  }
  return y;
}

BranchOutputs forward(const ModelSpec& spec, const ModelState& state, const DayInput& input) {
  spec.validate();
  BranchOutputs out;
  out.combined = Matrix(24, 1);

  if (has_rnn(spec.arch) || has_kf(spec.arch)) {
    if (input.rnn_seq.empty())
      fail(ErrorCode::MissingInput, "architecture needs an rnn input sequence");
    if (input.rnn_seq.rows() != static_cast<std::size_t>(spec.seq_len))
      fail(ErrorCode::ShapeMismatch, "sequence length != spec.seq_len");
  }
  if (has_lem(spec.arch) && input.lem_rows.empty())
    fail(ErrorCode::MissingInput, "architecture needs linear design rows");

  const Matrix h0(spec.hidden, 1);
  if (has_rnn(spec.arch)) {
    out.rnn = rnn_forward(spec, state, input.rnn_seq, h0, Activation::relu).first;
    out.combined += *out.rnn;
  }
  if (has_kf(spec.arch)) {
    out.kf = kf_forward(spec, state, input.rnn_seq, h0).first;
    out.combined += *out.kf;
  }
  if (has_lem(spec.arch)) {
    out.lem = lem_forward(spec, state, input.lem_rows);
    out.combined += *out.lem;
  }
  return out;
}

Decomposition decompose(const ModelSpec& spec, const BranchOutputs& out, const Matrix& y_mu,
                        const Matrix& y_sigma) {
  (void)spec;
  if (y_mu.cols() != 24 || y_sigma.cols() != 24)
    fail(ErrorCode::ShapeMismatch, "decompose expects 24 target moments");
  auto destd = [&](const Matrix& v) {
    Matrix r(24, 1);
    for (std::size_t s = 0; s < 24; ++s) r(s, 0) = v(s, 0) * y_sigma(0, s) + y_mu(0, s);
    return r;
  };
  Decomposition d;
  if (out.lem) d.lem = destd(*out.lem);
  if (out.rnn) d.rnn = destd(*out.rnn);
  if (out.kf) d.kf = destd(*out.kf);
  d.combined = destd(out.combined);
  return d;
}

ModelState init_weights(const ModelSpec& spec, Rng& rng, const Matrix* ols_coef) {
  spec.validate();
  ModelState st;
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
  const std::size_t hid = spec.hidden;
  const std::size_t width = spec.rnn_width;

  if (has_rnn(spec.arch)) {
    st.w_hid = uniform_init(rng, hid, hid, scale);
    st.w_ext = uniform_init(rng, hid, width, scale);
    st.b_hid = uniform_init(rng, hid, 1, scale);
    st.w_out = uniform_init(rng, 24, hid, scale);
    st.b_out = uniform_init(rng, 24, 1, scale);
  }
  if (has_kf(spec.arch)) {
    st.a_hid = uniform_init(rng, hid, hid, scale);
    st.a_ext = uniform_init(rng, hid, width, scale);
    st.b_hid_kf = uniform_init(rng, hid, 1, scale);
    st.a_out = uniform_init(rng, 24, hid, scale);
    st.b_out_kf = uniform_init(rng, 24, 1, scale);
  }
  if (has_lem(spec.arch)) {
    const std::size_t p1 = static_cast<std::size_t>(spec.lin_width) + 1;
    if (spec.use_ols && ols_coef) {
      if (ols_coef->rows() != 24 || ols_coef->cols() != p1)
        fail(ErrorCode::ShapeMismatch, "ols coefficient shape mismatch");
      st.lem = *ols_coef;
      st.lem *= spec.ols_scale;
    } else {
      st.lem = uniform_init(rng, 24, p1, 1.0 / std::sqrt(static_cast<double>(p1)));
    }
  }
  return st;
}

TapeParams register_params(Tape& tape, const ModelSpec& spec, const ModelState& state) {
  TapeParams p;
  auto reg = [&](Param which, const Matrix& m) -> TapeValue {
    return tape.param(m, param_id(which));
  };
  if (has_rnn(spec.arch)) {
    p.w_hid = reg(Param::w_hid, state.w_hid);
    p.w_ext = reg(Param::w_ext, state.w_ext);
    p.b_hid = reg(Param::b_hid, state.b_hid);
    p.w_out = reg(Param::w_out, state.w_out);
    p.b_out = reg(Param::b_out, state.b_out);
  }
  if (has_kf(spec.arch)) {
    p.a_hid = reg(Param::a_hid, state.a_hid);
    p.a_ext = reg(Param::a_ext, state.a_ext);
    p.b_hid_kf = reg(Param::b_hid_kf, state.b_hid_kf);
    p.a_out = reg(Param::a_out, state.a_out);
    p.b_out_kf = reg(Param::b_out_kf, state.b_out_kf);
  }
  if (has_lem(spec.arch)) p.lem = reg(Param::lem, state.lem);
  return p;
}

namespace {

TapeValue recurrent_forward_tape(Tape& tape, TapeValue w_hid, TapeValue w_ext, TapeValue b_hid,
                                 TapeValue w_out, TapeValue b_out,
                                 const std::vector<Matrix>& seq, Activation act,
                                 const Matrix& mask, std::size_t hidden, std::size_t n) {
  TapeValue h = tape.constant(Matrix(hidden, n));
  for (const Matrix& x : seq) {
    TapeValue z = tape.add(tape.matmul(w_hid, h), tape.matmul(w_ext, tape.constant(x)));
    z = tape.add_col_broadcast(z, b_hid);
    h = act == Activation::relu ? tape.relu(z) : z;
  }
  if (!mask.empty()) h = tape.mul_mask(h, mask);
  return tape.add_col_broadcast(tape.matmul(w_out, h), b_out);
}

}  // namespace

TapeValue forward_tape(Tape& tape, const ModelSpec& spec, const TapeParams& params,
                       const BatchInputs& in) {
  const bool recurrent = has_rnn(spec.arch) || has_kf(spec.arch);
  std::size_t n = 0;
  if (recurrent) {
    if (in.seq.size() != static_cast<std::size_t>(spec.seq_len))
      fail(ErrorCode::ShapeMismatch, "batch sequence length != spec.seq_len");
    n = in.seq.front().cols();
  } else {
    n = in.lem_design.rows() / 24;
  }

  TapeValue pred;
  if (has_rnn(spec.arch)) {
    pred = recurrent_forward_tape(tape, params.w_hid, params.w_ext, params.b_hid, params.w_out,
                                  params.b_out, in.seq, Activation::relu, in.rnn_mask,
                                  spec.hidden, n);
  }
  if (has_kf(spec.arch)) {
    TapeValue kf = recurrent_forward_tape(tape, params.a_hid, params.a_ext, params.b_hid_kf,
                                          params.a_out, params.b_out_kf, in.seq,
                                          Activation::identity, in.kf_mask, spec.hidden, n);
    pred = pred.valid() ? tape.add(pred, kf) : kf;
  }
  if (has_lem(spec.arch)) {
    if (in.lem_design.empty()) fail(ErrorCode::MissingInput, "batch lacks linear design rows");
    TapeValue lem = tape.lem_rows(params.lem, in.lem_design);
    pred = pred.valid() ? tape.add(pred, lem) : lem;
  }
  if (!pred.valid()) fail(ErrorCode::MissingInput, "no branch produced a prediction");
  return pred;
}

// --- checkpoint serialization (JSON; nlohmann round-trips doubles exactly) ---

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  json j;
  j["format"] = "epf-checkpoint";
  j["version"] = 1;
  j["spec"] = {{"arch", to_string(ck.spec.arch)},   {"hidden", ck.spec.hidden},
               {"seq_len", ck.spec.seq_len},        {"dropout", ck.spec.dropout},
               {"use_ols", ck.spec.use_ols},        {"ols_scale", ck.spec.ols_scale},
               {"freeze_lem", ck.spec.freeze_lem},  {"rnn_width", ck.spec.rnn_width},
               {"lin_width", ck.spec.lin_width}};
  json st;
  for_each_param(ck.spec, const_cast<ModelState&>(ck.state),
                 [&](Param p, Matrix& m) { st[param_name(p)] = matrix_to_json(m); });
  j["state"] = st;
  j["standardization"] = {{"lin_mu", matrix_to_json(ck.standardization.lin_mu)},
                          {"lin_sigma", matrix_to_json(ck.standardization.lin_sigma)},
                          {"rnn_mu", matrix_to_json(ck.standardization.rnn_mu)},
                          {"rnn_sigma", matrix_to_json(ck.standardization.rnn_sigma)},
                          {"y_mu", matrix_to_json(ck.standardization.y_mu)},
                          {"y_sigma", matrix_to_json(ck.standardization.y_sigma)},
                          {"feature_clamped", ck.standardization.feature_clamped}};
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "epf-checkpoint" || j.value("version", 0) != 1)
    fail(ErrorCode::ParseError, "not an epf checkpoint: " + path);

  Checkpoint ck;
  const json& sp = j.at("spec");
  ck.spec.arch = arch_from_string(sp.at("arch").get<std::string>());
  ck.spec.hidden = sp.at("hidden").get<int>();
  ck.spec.seq_len = sp.at("seq_len").get<int>();
  ck.spec.dropout = sp.at("dropout").get<double>();
  ck.spec.use_ols = sp.at("use_ols").get<bool>();
  ck.spec.ols_scale = sp.at("ols_scale").get<double>();
  ck.spec.freeze_lem = sp.value("freeze_lem", false);
  ck.spec.rnn_width = sp.at("rnn_width").get<int>();
  ck.spec.lin_width = sp.at("lin_width").get<int>();

  const json& st = j.at("state");
  for_each_param(ck.spec, ck.state,
                 [&](Param p, Matrix& m) { m = matrix_from_json(st.at(param_name(p))); });

  const json& sd = j.at("standardization");
  ck.standardization.lin_mu = matrix_from_json(sd.at("lin_mu"));
  ck.standardization.lin_sigma = matrix_from_json(sd.at("lin_sigma"));
  ck.standardization.rnn_mu = matrix_from_json(sd.at("rnn_mu"));
  ck.standardization.rnn_sigma = matrix_from_json(sd.at("rnn_sigma"));
  ck.standardization.y_mu = matrix_from_json(sd.at("y_mu"));
  ck.standardization.y_sigma = matrix_from_json(sd.at("y_sigma"));
  ck.standardization.feature_clamped = sd.at("feature_clamped").get<bool>();
  return ck;
}

}  // namespace epf::model
