#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epf/features.hpp"
#include "epf/matrix.hpp"
#include "epf/rng.hpp"
#include "epf/tape.hpp"

namespace epf::model {

// The six architectures: single branches and their parallel combinations.
// Branch outputs live on the standardized scale and are summed elementwise.
enum class Arch { rnn, kf, lem, lem_rnn, kf_rnn, lem_kf_rnn };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch a);

inline bool has_rnn(Arch a) { return a != Arch::kf && a != Arch::lem; }
inline bool has_kf(Arch a) { return a == Arch::kf || a == Arch::kf_rnn || a == Arch::lem_kf_rnn; }
inline bool has_lem(Arch a) {
  return a == Arch::lem || a == Arch::lem_rnn || a == Arch::lem_kf_rnn;
}

struct ModelSpec {
  Arch arch = Arch::lem_kf_rnn;
  int hidden = 32;       // H, recurrent state size
  int seq_len = 1;       // L, days fed to the recurrent branches
  double dropout = 0.0;  // applied to the final hidden activation in training
  bool use_ols = true;   // warm-start the linear branch from OLS
  double ols_scale = 1.0;  // alpha
  bool freeze_lem = false;  // keep the linear block at its warm-start values
  int rnn_width = 0;     // D
  int lin_width = 0;     // per-hour design width, intercept excluded

  void validate() const;  // Table-3 bounds
};

// All trainable blocks; only the blocks of the selected architecture are
// allocated. lem holds one row per hour with the intercept in column 0.
struct ModelState {
  Matrix w_hid, w_ext, b_hid, w_out, b_out;        // ReLU branch
  Matrix a_hid, a_ext, b_hid_kf, a_out, b_out_kf;  // identity (KF) branch
  Matrix lem;

  bool all_finite() const;
};

enum class Param {
  w_hid, w_ext, b_hid, w_out, b_out,
  a_hid, a_ext, b_hid_kf, a_out, b_out_kf,
  lem,
};

inline int param_id(Param p) { return static_cast<int>(p); }
const char* param_name(Param p);
// L1 is charged on output-side linear maps only.
bool is_output_side(Param p);

// Visits the blocks the architecture owns, in a fixed order.
template <typename State, typename Fn>
void for_each_param(const ModelSpec& spec, State& state, Fn&& fn) {
  if (has_rnn(spec.arch)) {
    fn(Param::w_hid, state.w_hid);
    fn(Param::w_ext, state.w_ext);
    fn(Param::b_hid, state.b_hid);
    fn(Param::w_out, state.w_out);
    fn(Param::b_out, state.b_out);
  }
  if (has_kf(spec.arch)) {
    fn(Param::a_hid, state.a_hid);
    fn(Param::a_ext, state.a_ext);
    fn(Param::b_hid_kf, state.b_hid_kf);
    fn(Param::a_out, state.a_out);
    fn(Param::b_out_kf, state.b_out_kf);
  }
  if (has_lem(spec.arch)) fn(Param::lem, state.lem);
}

enum class Activation { relu, identity };

// Inputs for one forecast day, already standardized.
struct DayInput {
  Matrix rnn_seq;   // L x D, one row per step, oldest first; empty if unused
  Matrix lem_rows;  // 24 x lin_width; empty if unused
};

struct BranchOutputs {
  std::optional<Matrix> lem, rnn, kf;  // 24 x 1, standardized
  Matrix combined;                     // elementwise sum of present branches
};

// L applications of the Elman cell followed by the output projection.
// Returns (output 24x1, final hidden Hx1). dropout_mask, when given, is
// multiplied into the final hidden state (training only; masks carry the
// inverted-dropout scaling already).
std::pair<Matrix, Matrix> rnn_forward(const ModelSpec& spec, const ModelState& state,
                                      const Matrix& seq, const Matrix& hidden_in, Activation act,
                                      const Matrix* dropout_mask = nullptr);

// Identity-activation recurrence over the A blocks; same contract.
std::pair<Matrix, Matrix> kf_forward(const ModelSpec& spec, const ModelState& state,
                                     const Matrix& seq, const Matrix& hidden_in,
                                     const Matrix* dropout_mask = nullptr);

// Per-hour linear model: out_s = lem(s,0) + rows(s,:) . lem(s,1:).
Matrix lem_forward(const ModelSpec& spec, const ModelState& state, const Matrix& lem_rows);

// Runs exactly the branches of spec.arch (evaluation mode, no dropout).
BranchOutputs forward(const ModelSpec& spec, const ModelState& state, const DayInput& input);

struct Decomposition {
  std::optional<Matrix> lem, rnn, kf;  // 24 x 1, EUR/MWh
  Matrix combined;
};

// De-standardizes each branch separately (component_c = y_std(c)*sigma + mu)
// and the summed forecast; combined = sum(components) - (C-1)*mu holds by
// construction.
Decomposition decompose(const ModelSpec& spec, const BranchOutputs& out, const Matrix& y_mu,
                        const Matrix& y_sigma);

// Fresh weights: recurrent blocks uniform on +-1/sqrt(H); the linear block
// is alpha * ols_coef when the OLS flag is set and a solution is provided,
// uniform on +-1/sqrt(p+1) otherwise.
ModelState init_weights(const ModelSpec& spec, Rng& rng, const Matrix* ols_coef = nullptr);

// --- training-side batched forward over the tape ---

struct TapeParams {
  TapeValue w_hid, w_ext, b_hid, w_out, b_out;
  TapeValue a_hid, a_ext, b_hid_kf, a_out, b_out_kf;
  TapeValue lem;
};

TapeParams register_params(Tape& tape, const ModelSpec& spec, const ModelState& state);

struct BatchInputs {
  std::vector<Matrix> seq;  // L matrices of shape D x n (column per sample)
  Matrix lem_design;        // n*24 x lin_width
  Matrix rnn_mask, kf_mask;  // H x n inverted-dropout masks; empty = off
};

// Predictions [24 x n] on the standardized scale.
TapeValue forward_tape(Tape& tape, const ModelSpec& spec, const TapeParams& params,
                       const BatchInputs& in);

// --- checkpointing ---

struct Checkpoint {
  ModelSpec spec;
  ModelState state;
  data::StandardizationParams standardization;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace epf::model
