#include <algorithm>
#include <map>

#include "mti/error.hpp"
#include "mti/eval.hpp"

namespace mti {

namespace {

constexpr std::string_view kErrorColumn = "<error>";

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double pre, double rcl) { return pre + rcl == 0.0 ? 0.0 : 2.0 * pre * rcl / (pre + rcl); }

struct Confusion {
    std::vector<std::string> labels;
    std::map<std::string, std::size_t, std::less<>> index;
    std::vector<std::vector<std::size_t>> counts;

    std::size_t at(std::string_view label) const { return index.find(label)->second; }
    std::size_t row_sum(std::size_t r) const {
        std::size_t s = 0;
        for (auto c : counts[r]) s += c;
        return s;
    }
    std::size_t col_sum(std::size_t c) const {
        std::size_t s = 0;
        for (const auto& row : counts) s += row[c];
        return s;
    }
    ClassMetrics metrics_for(std::string_view label) const {
        const std::size_t i = at(label);
        const std::size_t tp = counts[i][i];
        ClassMetrics m;
        m.support = row_sum(i);
        m.pre = ratio(tp, col_sum(i));
        m.rcl = ratio(tp, m.support);
        m.f1 = f1_of(m.pre, m.rcl);
        return m;
    }
};

Confusion tabulate(const std::vector<Prediction>& results, const std::vector<std::string>& label_set,
                   bool truth_may_be_novel) {
    if (results.empty()) throw ValidationError("cannot score an empty result set");
    Confusion cm;
    cm.labels = label_set;
    cm.labels.emplace_back(kNovelLabel);
    const bool any_error =
        std::any_of(results.begin(), results.end(), [](const Prediction& p) { return p.predicted.empty(); });
    if (any_error) cm.labels.emplace_back(kErrorColumn);
    for (std::size_t i = 0; i < cm.labels.size(); ++i)
        if (!cm.index.emplace(cm.labels[i], i).second)
            throw ValidationError("label set contains '" + cm.labels[i] + "' twice or uses a reserved name");
    cm.counts.assign(cm.labels.size(), std::vector<std::size_t>(cm.labels.size(), 0));

    for (const auto& p : results) {
        const bool truth_novel = p.truth == kNovelLabel;
        if (truth_novel ? !truth_may_be_novel : !std::count(label_set.begin(), label_set.end(), p.truth))
            throw ValidationError("true label '" + p.truth + "' is outside the known label set");
        const std::string_view pred = p.predicted.empty() ? kErrorColumn : std::string_view(p.predicted);
        auto col = cm.index.find(pred);
        if (col == cm.index.end() || (pred == kErrorColumn && !p.predicted.empty()))
            throw ValidationError("predicted label '" + p.predicted + "' is outside the label space");
        cm.counts[cm.at(p.truth)][col->second] += 1;
    }
    return cm;
}

// Known classes that occur as a truth or a prediction.
std::vector<std::string> active_known(const Confusion& cm, const std::vector<std::string>& label_set) {
    std::vector<std::string> out;
    for (const auto& l : label_set) {
        const std::size_t i = cm.at(l);
        if (cm.row_sum(i) > 0 || cm.col_sum(i) > 0) out.push_back(l);
    }
    return out;
}

void fill_confusion(MetricsReport& r, const Confusion& cm) {
    r.labels = cm.labels;
    r.confusion = cm.counts;
}

} // namespace

MetricsReport evaluate_known(const std::vector<Prediction>& results, const std::vector<std::string>& label_set) {
    const Confusion cm = tabulate(results, label_set, false);
    MetricsReport r;
    r.samples = results.size();
    const auto classes = active_known(cm, label_set);
    for (const auto& l : classes) {
        const auto m = cm.metrics_for(l);
        r.per_class[l] = m;
        r.macro_pre += m.pre;
        r.macro_rcl += m.rcl;
        r.macro_f1 += m.f1;
    }
    const auto n = static_cast<double>(std::max<std::size_t>(1, classes.size()));
    r.macro_pre /= n;
    r.macro_rcl /= n;
    r.macro_f1 /= n;
    fill_confusion(r, cm);
    return r;
}

MetricsReport evaluate_openset(const std::vector<Prediction>& results, const std::vector<std::string>& label_set) {
    const Confusion cm = tabulate(results, label_set, true);
    MetricsReport r;
    r.openset = true;
    r.samples = results.size();

    std::size_t known_total = 0, known_right = 0, novel_total = 0, novel_right = 0;
    for (const auto& p : results) {
        if (p.truth == kNovelLabel) {
            ++novel_total;
            novel_right += p.predicted == kNovelLabel;
        } else {
            ++known_total;
            known_right += p.predicted == p.truth;
        }
    }
    if (known_total == 0) throw ValidationError("open-set scoring needs at least one known-class sample");
    if (novel_total == 0) throw ValidationError("open-set scoring needs at least one novel sample");

    const auto classes = active_known(cm, label_set);
    for (const auto& l : classes) {
        const auto m = cm.metrics_for(l);
        r.per_class[l] = m;
        r.pre_k += m.pre;
        r.rcl_k += m.rcl;
        r.macro_f1 += m.f1;
    }
    const auto n = static_cast<double>(std::max<std::size_t>(1, classes.size()));
    r.pre_k /= n;
    r.rcl_k /= n;
    r.macro_f1 /= n;
    r.macro_pre = r.pre_k;
    r.macro_rcl = r.rcl_k;

    const auto novel = cm.metrics_for(kNovelLabel);
    r.per_class[std::string(kNovelLabel)] = novel;
    r.pre_n = novel.pre;
    r.rcl_n = novel.rcl;
    r.aks = ratio(known_right, known_total);
    r.aus = ratio(novel_right, novel_total);
    r.na = 0.5 * (r.aks + r.aus);
    fill_confusion(r, cm);
    return r;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
    MetricsReport m;
    if (reports.empty()) return m;
    const auto n = static_cast<double>(reports.size());
    m.openset = reports.front().openset;

    std::map<std::string, std::pair<ClassMetrics, std::size_t>> per_class;
    std::vector<std::string> labels;
    std::map<std::pair<std::string, std::string>, std::size_t> cells;
    for (const auto& r : reports) {
        m.samples += r.samples;
        m.macro_pre += r.macro_pre / n;
        m.macro_rcl += r.macro_rcl / n;
        m.macro_f1 += r.macro_f1 / n;
        m.pre_k += r.pre_k / n;
        m.rcl_k += r.rcl_k / n;
        m.pre_n += r.pre_n / n;
        m.rcl_n += r.rcl_n / n;
        m.aks += r.aks / n;
        m.aus += r.aus / n;
        m.na += r.na / n;
        for (const auto& [label, cmx] : r.per_class) {
            auto& [acc, count] = per_class[label];
            acc.pre += cmx.pre;
            acc.rcl += cmx.rcl;
            acc.f1 += cmx.f1;
            acc.support += cmx.support;
            ++count;
        }
        for (const auto& l : r.labels)
            if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
        for (std::size_t i = 0; i < r.labels.size(); ++i)
            for (std::size_t j = 0; j < r.labels.size(); ++j) cells[{r.labels[i], r.labels[j]}] += r.confusion[i][j];
    }
    for (auto& [label, entry] : per_class) {
        auto [acc, count] = entry;
        const auto c = static_cast<double>(count);
        m.per_class[label] = {acc.pre / c, acc.rcl / c, acc.f1 / c, acc.support};
    }
    // Keep the reserved error column last.
    std::stable_partition(labels.begin(), labels.end(), [](const std::string& l) { return l != kErrorColumn; });
    m.labels = labels;
    m.confusion.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (auto it = cells.find({labels[i], labels[j]}); it != cells.end()) m.confusion[i][j] = it->second;
    return m;
}

} // namespace mti
