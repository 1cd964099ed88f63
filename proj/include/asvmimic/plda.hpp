// asvmimic/plda.hpp

// Copyright 2026  The ASVMimic Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "asvmimic/common.hpp"
#include "asvmimic/lda.hpp"
#include "asvmimic/serial.hpp"
#include "asvmimic/store.hpp"

namespace asvmimic {

enum class PldaVariant { kSimplified, kTwoCov };

inline std::string ToString(PldaVariant v) {
  return v == PldaVariant::kSimplified ? "simplified" : "two_cov";
}

/**
   PLDA back-end.

   two_cov:     y ~ N(mu, B),  x | y ~ N(y, W)       (full B and W)
   simplified:  x = mu + V h + e,  h ~ N(0, I_S),  e ~ N(0, Lambda)

   Both induce the same Gaussian trial model with an effective between-class
   covariance (B or V V') and within-class covariance (W or Lambda), which is
   all that scoring needs.
*/
struct PldaModel {
  PldaVariant variant = PldaVariant::kTwoCov;
  Eigen::VectorXd mean;      // length L
  Eigen::MatrixXd between;   // two_cov: B (L x L)
  Eigen::MatrixXd within;    // two_cov: W (L x L)
  Eigen::MatrixXd v;         // simplified: L x S speaker loading
  Eigen::MatrixXd residual;  // simplified: Lambda (L x L)

  Eigen::Index Dim() const { return mean.size(); }
  Eigen::MatrixXd EffectiveBetween() const {
    return variant == PldaVariant::kTwoCov ? between : Eigen::MatrixXd(v * v.transpose());
  }
  const Eigen::MatrixXd &EffectiveWithin() const {
    return variant == PldaVariant::kTwoCov ? within : residual;
  }
};

enum class Hypothesis { kTarget, kNontarget, kUnknown };
enum class DomainTag { kTargetDomain, kAttackerDomain, kCrossDomain };

inline std::string ToString(Hypothesis h) {
  switch (h) {
    case Hypothesis::kTarget: return "target";
    case Hypothesis::kNontarget: return "nontarget";
    default: return "unknown";
  }
}
inline std::string ToString(DomainTag d) {
  switch (d) {
    case DomainTag::kTargetDomain: return "target_domain";
    case DomainTag::kAttackerDomain: return "attacker_domain";
    default: return "cross_domain";
  }
}
inline Hypothesis ParseHypothesis(const std::string &s) {
  if (s == "target") return Hypothesis::kTarget;
  if (s == "nontarget") return Hypothesis::kNontarget;
  if (s == "unknown") return Hypothesis::kUnknown;
  throw DataError("invalid hypothesis label: '" + s + "'");
}
inline DomainTag ParseDomainTag(const std::string &s) {
  if (s == "target_domain") return DomainTag::kTargetDomain;
  if (s == "attacker_domain") return DomainTag::kAttackerDomain;
  if (s == "cross_domain") return DomainTag::kCrossDomain;
  throw DataError("invalid domain tag: '" + s + "'");
}

// One scored comparison between an enrollment reference and a test utterance.
struct TrialScore {
  std::string enroll_ref;
  std::string test_ref;
  double llr = 0.0;
  Hypothesis hypothesis_label = Hypothesis::kUnknown;
  DomainTag domain_tag = DomainTag::kCrossDomain;
};

namespace plda_detail {

// Clamp eigenvalues of a symmetric matrix from below; warns when it bites.
inline Eigen::MatrixXd FloorSpd(const Eigen::MatrixXd &m, double floor, const char *what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError("plda: eigensolver failed");
  if (es.eigenvalues().minCoeff() >= floor) return m;
  Warn(std::string("plda: ") + what + " covariance floored to stay positive definite");
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct SpeakerStats {
  double count = 0.0;
  Eigen::VectorXd sum;      // sum of vectors
  Eigen::MatrixXd scatter;  // sum (x - class mean)(x - class mean)'
};

inline std::vector<SpeakerStats> CollectSpeakerStats(const LabeledVectors &data) {
  std::map<std::string, std::vector<Eigen::Index>> classes;
  for (Eigen::Index i = 0; i < data.vectors.rows(); ++i)
    classes[data.labels[static_cast<std::size_t>(i)]].push_back(i);
  const Eigen::Index d = data.vectors.cols();
  std::vector<SpeakerStats> out;
  out.reserve(classes.size());
  for (const auto &[label, idx] : classes) {
    SpeakerStats s;
    s.count = static_cast<double>(idx.size());
    s.sum = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : idx) s.sum += data.vectors.row(i).transpose();
    const Eigen::VectorXd cm = s.sum / s.count;
    s.scatter = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i : idx) {
      const Eigen::VectorXd c = data.vectors.row(i).transpose() - cm;
      s.scatter += c * c.transpose();
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Exact marginal log-likelihood of the data under (mu, B, W); used to
// monitor EM progress for both variants.
inline double MarginalLogLik(const std::vector<SpeakerStats> &speakers,
                             const Eigen::VectorXd &mu, const Eigen::MatrixXd &between,
                             const Eigen::MatrixXd &within) {
  const Eigen::Index d = mu.size();
  const Eigen::LLT<Eigen::MatrixXd> llt_w(within);
  if (llt_w.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  double logdet_w = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) logdet_w += 2.0 * std::log(llt_w.matrixL()(i, i));

  double ll = 0.0;
  for (const auto &s : speakers) {
    const double n = s.count;
    const Eigen::VectorXd xbar = s.sum / n;
    const Eigen::MatrixXd cov_mean = within + n * between;
    const Eigen::LLT<Eigen::MatrixXd> llt_m(cov_mean);
    if (llt_m.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    double logdet_m = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) logdet_m += 2.0 * std::log(llt_m.matrixL()(i, i));
    const Eigen::VectorXd diff = xbar - mu;
    ll += -0.5 * (n * d * std::log(2.0 * kPi) + logdet_m +
                  n * diff.dot(llt_m.solve(diff)) + (n - 1.0) * logdet_w +
                  llt_w.solve(s.scatter).trace());
  }
  return ll;
}

}  // namespace plda_detail

struct PldaTrainOptions {
  PldaVariant variant = PldaVariant::kTwoCov;
  int speaker_dim = 200;  // simplified variant only
  int em_iterations = 10;
  double eigen_floor = 1e-8;
  std::function<void(int, double)> progress;  // (iteration, marginal loglik)
};

/**
   PLDA EM.

   two_cov alternates the Gaussian posterior of each speaker mean with
   closed-form updates of (mu, B, W); simplified holds mu at the sample mean
   and alternates the speaker-factor posterior with the factor-analysis
   updates of (V, Lambda).  Covariances are eigenvalue-floored when an update
   leaves them semi-definite (single-utterance speakers).  The marginal
   log-likelihood is non-decreasing across iterations (tests assert it).
*/
inline PldaModel TrainPlda(const LabeledVectors &data, const PldaTrainOptions &opts = {}) {
  auto speakers = plda_detail::CollectSpeakerStats(data);
  const Eigen::Index d = data.vectors.cols();
  const double n_total = static_cast<double>(data.vectors.rows());
  if (speakers.size() < 2) throw DataError("train_plda: need at least 2 speakers");
  if (speakers.size() < 10) Warn("train_plda: fewer than 10 speakers");
  bool any_multi = false;
  for (const auto &s : speakers) any_multi |= (s.count >= 2.0);
  if (!any_multi) Warn("train_plda: no speaker has 2+ utterances; within covariance degenerate");

  PldaModel model;
  model.variant = opts.variant;

  // moment initialization
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (const auto &s : speakers) mu += s.sum;
  mu /= n_total;
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  for (const auto &s : speakers) {
    const Eigen::VectorXd cm = s.sum / s.count - mu;
    between += cm * cm.transpose();
    within += s.scatter;
  }
  between /= static_cast<double>(speakers.size());
  within /= n_total;
  between = plda_detail::FloorSpd(between, opts.eigen_floor, "between");
  within = plda_detail::FloorSpd(within, opts.eigen_floor, "within");

  if (opts.variant == PldaVariant::kTwoCov) {
    for (int it = 0; it < opts.em_iterations; ++it) {
      if (opts.progress)
        opts.progress(it, plda_detail::MarginalLogLik(speakers, mu, between, within));
      const Eigen::MatrixXd b_inv = between.llt().solve(Eigen::MatrixXd::Identity(d, d));
      const Eigen::MatrixXd w_inv = within.llt().solve(Eigen::MatrixXd::Identity(d, d));
      Eigen::VectorXd new_mu = Eigen::VectorXd::Zero(d);
      std::vector<Eigen::VectorXd> y_hat(speakers.size());
      std::vector<Eigen::MatrixXd> y_cov(speakers.size());
      for (std::size_t s = 0; s < speakers.size(); ++s) {
        const auto &sp = speakers[s];
        const Eigen::MatrixXd prec = b_inv + sp.count * w_inv;
        const Eigen::LLT<Eigen::MatrixXd> llt(prec);
        y_cov[s] = llt.solve(Eigen::MatrixXd::Identity(d, d));
        y_hat[s] = llt.solve(b_inv * mu + w_inv * sp.sum);
        new_mu += y_hat[s];
      }
      new_mu /= static_cast<double>(speakers.size());
      Eigen::MatrixXd new_b = Eigen::MatrixXd::Zero(d, d);
      Eigen::MatrixXd new_w = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t s = 0; s < speakers.size(); ++s) {
        const auto &sp = speakers[s];
        const Eigen::VectorXd db = y_hat[s] - new_mu;
        new_b += y_cov[s] + db * db.transpose();
        const Eigen::VectorXd dw = sp.sum / sp.count - y_hat[s];
        new_w += sp.scatter + sp.count * (y_cov[s] + dw * dw.transpose());
      }
      mu = new_mu;
      between = plda_detail::FloorSpd(new_b / static_cast<double>(speakers.size()),
                                      opts.eigen_floor, "between");
      within = plda_detail::FloorSpd(new_w / n_total, opts.eigen_floor, "within");
    }
    model.mean = mu;
    model.between = between;
    model.within = within;
    return model;
  }

  // simplified: x = mu + V h + e
  const int s_dim = opts.speaker_dim;
  if (s_dim <= 0 || s_dim > d)
    throw DataError("train_plda: speaker subspace dimension out of range");
  // init V from the between-class spectrum, Lambda from the within covariance
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(between);
  Eigen::MatrixXd v(d, s_dim);
  for (int j = 0; j < s_dim; ++j) {
    const double ev = std::max(es.eigenvalues()(d - 1 - j), opts.eigen_floor);
    v.col(j) = es.eigenvectors().col(d - 1 - j) * std::sqrt(ev);
  }
  Eigen::MatrixXd lambda = within;

  for (int it = 0; it < opts.em_iterations; ++it) {
    if (opts.progress)
      opts.progress(it, plda_detail::MarginalLogLik(speakers, mu, v * v.transpose(), lambda));
    const Eigen::MatrixXd lam_inv = lambda.llt().solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::MatrixXd vt_li = v.transpose() * lam_inv;  // S x L
    Eigen::MatrixXd acc_vh = Eigen::MatrixXd::Zero(d, s_dim);   // sum (sum_s - n mu) h'
    Eigen::MatrixXd acc_hh = Eigen::MatrixXd::Zero(s_dim, s_dim);
    Eigen::MatrixXd total_scatter = Eigen::MatrixXd::Zero(d, d);
    for (const auto &sp : speakers) {
      const Eigen::VectorXd centered_sum = sp.sum - sp.count * mu;
      const Eigen::MatrixXd prec =
          Eigen::MatrixXd::Identity(s_dim, s_dim) + sp.count * (vt_li * v);
      const Eigen::LLT<Eigen::MatrixXd> llt(prec);
      const Eigen::VectorXd h_hat = llt.solve(vt_li * centered_sum);
      const Eigen::MatrixXd h_cov = llt.solve(Eigen::MatrixXd::Identity(s_dim, s_dim));
      acc_vh += centered_sum * h_hat.transpose();
      acc_hh += sp.count * (h_cov + h_hat * h_hat.transpose());
      const Eigen::VectorXd cm = sp.sum / sp.count - mu;
      total_scatter += sp.scatter + sp.count * cm * cm.transpose();
    }
    const Eigen::MatrixXd new_v = acc_hh.ldlt().solve(acc_vh.transpose()).transpose();
    Eigen::MatrixXd new_lambda =
        (total_scatter - new_v * acc_vh.transpose()) / n_total;
    new_lambda = 0.5 * (new_lambda + new_lambda.transpose());
    v = new_v;
    lambda = plda_detail::FloorSpd(new_lambda, opts.eigen_floor, "residual");
  }
  model.mean = mu;
  model.v = v;
  model.residual = lambda;
  return model;
}

/**
   Same/different-speaker log-likelihood ratio for a pair of vectors.

   Under H0 (same speaker) the pair is jointly Gaussian with covariance
   [[B+W, B], [B, B+W]]; under H1 the two marginals N(mu, B+W) are
   independent.  Multiple enrollment vectors are averaged into one vector
   before scoring.  The Cholesky factors are cached, so scoring many trials
   against one model is cheap.
*/
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model)
      : mean_(model.mean) {
    const Eigen::MatrixXd b = model.EffectiveBetween();
    const Eigen::MatrixXd w = model.EffectiveWithin();
    const Eigen::Index d = mean_.size();
    const Eigen::MatrixXd total = b + w;
    Eigen::MatrixXd joint(2 * d, 2 * d);
    joint << total, b, b, total;
    llt_total_.compute(total);
    llt_joint_.compute(joint);
    if (llt_total_.info() != Eigen::Success || llt_joint_.info() != Eigen::Success)
      throw NumericError("plda scorer: covariance not positive definite");
    logdet_total_ = LogDet(llt_total_);
    logdet_joint_ = LogDet(llt_joint_);
  }

  double PairLlr(const Eigen::VectorXd &enroll, const Eigen::VectorXd &test) const {
    const Eigen::Index d = mean_.size();
    if (enroll.size() != d || test.size() != d)
      throw DataError("plda scorer: embedding dimension mismatch");
    Eigen::VectorXd pair(2 * d);
    pair << enroll - mean_, test - mean_;
    const double q_joint = pair.dot(llt_joint_.solve(pair));
    const Eigen::VectorXd ec = enroll - mean_, tc = test - mean_;
    const double q_marg = ec.dot(llt_total_.solve(ec)) + tc.dot(llt_total_.solve(tc));
    // the 2*d*log(2*pi) terms cancel
    return -0.5 * (logdet_joint_ + q_joint) + 0.5 * (2.0 * logdet_total_ + q_marg);
  }

  double Llr(const std::vector<Eigen::VectorXd> &enroll, const Eigen::VectorXd &test) const {
    if (enroll.empty()) throw DataError("plda scorer: empty enrollment set");
    Eigen::VectorXd avg = enroll.front();
    for (std::size_t i = 1; i < enroll.size(); ++i) {
      if (enroll[i].size() != avg.size())
        throw DataError("plda scorer: enrollment dimension mismatch");
      avg += enroll[i];
    }
    avg /= static_cast<double>(enroll.size());
    return PairLlr(avg, test);
  }

 private:
  static double LogDet(const Eigen::LLT<Eigen::MatrixXd> &llt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixL().rows(); ++i)
      s += 2.0 * std::log(llt.matrixL()(i, i));
    return s;
  }

  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_total_;
  Eigen::LLT<Eigen::MatrixXd> llt_joint_;
  double logdet_total_ = 0.0;
  double logdet_joint_ = 0.0;
};

inline TrialScore ScoreLlr(const PldaModel &model, const std::vector<Eigen::VectorXd> &enroll,
                           const Eigen::VectorXd &test, const std::string &enroll_ref = "",
                           const std::string &test_ref = "") {
  PldaScorer scorer(model);
  TrialScore trial;
  trial.enroll_ref = enroll_ref;
  trial.test_ref = test_ref;
  trial.llr = scorer.Llr(enroll, test);
  if (!std::isfinite(trial.llr)) throw NumericError("score_llr: non-finite LLR");
  return trial;
}

template <>
struct ArtifactTraits<PldaModel> {
  static constexpr std::uint32_t kTypeTag = 0x504c4401;  // "PLD",1
  static constexpr std::uint32_t kVersion = 1;
  static void Serialize(BlobWriter &w, const PldaModel &m) {
    w.WriteU8(m.variant == PldaVariant::kTwoCov ? 1 : 0);
    w.WriteVector(m.mean);
    w.WriteMatrix(m.between);
    w.WriteMatrix(m.within);
    w.WriteMatrix(m.v);
    w.WriteMatrix(m.residual);
  }
  static PldaModel Deserialize(BlobReader &r) {
    PldaModel m;
    m.variant = r.ReadU8() == 1 ? PldaVariant::kTwoCov : PldaVariant::kSimplified;
    m.mean = r.ReadVector();
    m.between = r.ReadMatrix();
    m.within = r.ReadMatrix();
    m.v = r.ReadMatrix();
    m.residual = r.ReadMatrix();
    return m;
  }
};

}  // namespace asvmimic
