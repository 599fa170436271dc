#ifndef ADPREDICT_MODEL_IO_HPP
#define ADPREDICT_MODEL_IO_HPP

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "adpredict/adaboost.hpp"
#include "adpredict/error.hpp"
#include "adpredict/forest.hpp"
#include "adpredict/linear_model.hpp"

// Model text format. Every number is written in shortest round-trip form, so a
// save/load cycle reproduces the model bit for bit.
//
//   adpredict-model 1
//   kind lr|svm|adaboost|rf
//   lr/svm:    dim K / bias b / platt a b / converged 0|1 iterations N
//              then K lines: "w mean scale"
//   adaboost:  dim K / stumps T, then T lines: "feature threshold polarity alpha error"
//   rf:        dim K / forest n_trees max_depth features_per_split
//              per tree: "tree N", then N lines: "feature threshold left right count0 count1"
//   end

namespace adpredict {

enum class ModelKind { lr, svm, adaboost, rf };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::lr: return "lr";
        case ModelKind::svm: return "svm";
        case ModelKind::adaboost: return "adaboost";
        case ModelKind::rf: return "rf";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "lr") return ModelKind::lr;
    if (s == "svm") return ModelKind::svm;
    if (s == "adaboost") return ModelKind::adaboost;
    if (s == "rf") return ModelKind::rf;
    throw ConfigError("unknown model kind '" + s + "' (expected lr, svm, adaboost, rf)");
}

/// Any of the four fitted classifiers.
struct Model {
    std::variant<LinearModel, StumpEnsemble, Forest> fit;

    ModelKind kind() const {
        if (const auto* m = std::get_if<LinearModel>(&fit)) {
            return m->kind == LinearKind::logistic ? ModelKind::lr : ModelKind::svm;
        }
        return std::holds_alternative<StumpEnsemble>(fit) ? ModelKind::adaboost : ModelKind::rf;
    }

    std::size_t dim() const {
        return std::visit(
            [](const auto& m) -> std::size_t {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, LinearModel>) {
                    return m.dim();
                } else {
                    return m.n_features;
                }
            },
            fit);
    }

    double predict_proba(std::span<const double> x) const {
        return std::visit([&](const auto& m) { return m.predict_proba(x); }, fit);
    }

    /// Ranking score for ROC/PR: the raw margin for SVM and AdaBoost, the probability otherwise.
    double rank_score(std::span<const double> x) const {
        if (const auto* m = std::get_if<LinearModel>(&fit)) {
            return m->kind == LinearKind::svm ? m->score(x) : m->predict_proba(x);
        }
        if (const auto* m = std::get_if<StumpEnsemble>(&fit)) return m->score(x);
        return std::get<Forest>(fit).predict_proba(x);
    }
};

struct TrainOptions {
    LrOptions lr;
    SvmOptions svm;
    int adaboost_rounds = 200;
    ForestOptions rf;
};

inline Model train_model(ModelKind kind, const Matrix& x, std::span<const int> y, const TrainOptions& opt) {
    switch (kind) {
        case ModelKind::lr: return {train_lr(x, y, opt.lr)};
        case ModelKind::svm: return {train_svm(x, y, opt.svm)};
        case ModelKind::adaboost: return {train_adaboost(x, y, opt.adaboost_rounds)};
        case ModelKind::rf: return {train_rf(x, y, opt.rf)};
    }
    throw ArgumentError("unknown model kind");
}

namespace detail {

inline std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word() {
        std::string s;
        if (!(in_ >> s)) throw DataError("model file: unexpected end of input");
        return s;
    }

    void expect(const std::string& w) {
        const auto got = word();
        if (got != w) throw DataError("model file: expected '" + w + "', found '" + got + "'");
    }

    double real() {
        const auto s = word();
        double v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DataError("model file: bad number '" + s + "'");
        return v;
    }

    long long integer() {
        const auto s = word();
        long long v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DataError("model file: bad integer '" + s + "'");
        return v;
    }

private:
    std::istream& in_;
};

}  // namespace detail

inline void save_model(std::ostream& out, const Model& model) {
    using detail::num;
    out << "adpredict-model 1\n";
    out << "kind " << to_string(model.kind()) << '\n';
    if (const auto* m = std::get_if<LinearModel>(&model.fit)) {
        out << "dim " << m->dim() << '\n';
        out << "bias " << num(m->bias) << '\n';
        out << "platt " << num(m->platt_a) << ' ' << num(m->platt_b) << '\n';
        out << "converged " << (m->converged ? 1 : 0) << " iterations " << m->iterations << '\n';
        for (std::size_t j = 0; j < m->dim(); ++j) {
            out << num(m->weights[j]) << ' ' << num(m->scaling.mean[j]) << ' ' << num(m->scaling.scale[j]) << '\n';
        }
    } else if (const auto* m = std::get_if<StumpEnsemble>(&model.fit)) {
        out << "dim " << m->n_features << '\n';
        out << "stumps " << m->stumps.size() << '\n';
        for (const auto& s : m->stumps) {
            out << s.feature << ' ' << num(s.threshold) << ' ' << s.polarity << ' ' << num(s.alpha) << ' '
                << num(s.weighted_error) << '\n';
        }
    } else {
        const auto& f = std::get<Forest>(model.fit);
        out << "dim " << f.n_features << '\n';
        out << "forest " << f.trees.size() << ' ' << f.max_depth << ' ' << f.features_per_split << '\n';
        for (const auto& t : f.trees) {
            out << "tree " << t.nodes.size() << '\n';
            for (const auto& nd : t.nodes) {
                out << nd.feature << ' ' << num(nd.threshold) << ' ' << nd.left << ' ' << nd.right << ' '
                    << num(nd.count0) << ' ' << num(nd.count1) << '\n';
            }
        }
    }
    out << "end\n";
}

inline Model load_model(std::istream& in) {
    detail::TokenReader r(in);
    r.expect("adpredict-model");
    if (r.integer() != 1) throw DataError("model file: unsupported format version");
    r.expect("kind");
    const auto kind = parse_model_kind(r.word());
    r.expect("dim");
    const auto dim = static_cast<std::size_t>(r.integer());
    Model model;
    if (kind == ModelKind::lr || kind == ModelKind::svm) {
        LinearModel m;
        m.kind = kind == ModelKind::lr ? LinearKind::logistic : LinearKind::svm;
        r.expect("bias");
        m.bias = r.real();
        r.expect("platt");
        m.platt_a = r.real();
        m.platt_b = r.real();
        r.expect("converged");
        m.converged = r.integer() != 0;
        r.expect("iterations");
        m.iterations = static_cast<int>(r.integer());
        m.weights.resize(dim);
        m.scaling.mean.resize(dim);
        m.scaling.scale.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            m.weights[j] = r.real();
            m.scaling.mean[j] = r.real();
            m.scaling.scale[j] = r.real();
        }
        model.fit = std::move(m);
    } else if (kind == ModelKind::adaboost) {
        StumpEnsemble m;
        m.n_features = dim;
        r.expect("stumps");
        const auto n = r.integer();
        for (long long i = 0; i < n; ++i) {
            Stump s;
            s.feature = static_cast<std::size_t>(r.integer());
            s.threshold = r.real();
            s.polarity = static_cast<int>(r.integer());
            s.alpha = r.real();
            s.weighted_error = r.real();
            if (s.feature >= dim) throw DataError("model file: stump feature out of range");
            m.stumps.push_back(s);
        }
        model.fit = std::move(m);
    } else {
        Forest f;
        f.n_features = dim;
        r.expect("forest");
        const auto n_trees = r.integer();
        f.max_depth = static_cast<int>(r.integer());
        f.features_per_split = static_cast<int>(r.integer());
        for (long long t = 0; t < n_trees; ++t) {
            r.expect("tree");
            const auto n_nodes = r.integer();
            DecisionTree tree;
            for (long long i = 0; i < n_nodes; ++i) {
                TreeNode nd;
                nd.feature = static_cast<int>(r.integer());
                nd.threshold = r.real();
                nd.left = static_cast<int>(r.integer());
                nd.right = static_cast<int>(r.integer());
                nd.count0 = r.real();
                nd.count1 = r.real();
                if (!nd.is_leaf() && (nd.left <= i || nd.right <= i || nd.left >= n_nodes || nd.right >= n_nodes ||
                                      static_cast<std::size_t>(nd.feature) >= dim)) {
                    throw DataError("model file: malformed tree node");
                }
                tree.nodes.push_back(nd);
            }
            f.trees.push_back(std::move(tree));
        }
        model.fit = std::move(f);
    }
    r.expect("end");
    return model;
}

inline std::string model_to_string(const Model& m) {
    std::ostringstream out;
    save_model(out, m);
    return out.str();
}

}  // namespace adpredict

#endif  // ADPREDICT_MODEL_IO_HPP
