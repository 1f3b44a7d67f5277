#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ellcharge/errors.hpp"

namespace ellcharge::abstraction {

/// Ordered finite symbol set with a dense index.
class Alphabet {
public:
    Alphabet() = default;
    explicit Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols))
    {
        for (std::size_t i = 0; i < symbols_.size(); ++i)
            if (!index_.emplace(symbols_[i], static_cast<int>(i)).second)
                throw DomainError("duplicate symbol '" + symbols_[i] + "' in alphabet");
    }

    [[nodiscard]] int index_of(const std::string& s) const
    {
        const auto it = index_.find(s);
        if (it == index_.end()) throw DomainError("symbol '" + s + "' not in alphabet");
        return it->second;
    }
    [[nodiscard]] bool contains(const std::string& s) const { return index_.count(s) != 0; }
    [[nodiscard]] const std::string& symbol(int i) const { return symbols_.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] std::size_t size() const noexcept { return symbols_.size(); }
    [[nodiscard]] const std::vector<std::string>& symbols() const noexcept { return symbols_; }

    friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.symbols_ == b.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> index_;
};

/// An H-long label word and the id of the sample that produced it.
struct Behavior {
    std::vector<int> word;
    std::uint64_t source_id = 0;
};

/// One ℓ-long window, ordered lexicographically.
struct EllSequence {
    std::vector<int> window;
    friend auto operator<=>(const EllSequence&, const EllSequence&) = default;
};

using Word = std::vector<int>;

/// All distinct ℓ-windows of a word.
inline std::set<EllSequence> subsequences(const Word& word, int ell)
{
    if (ell < 2 || static_cast<std::size_t>(ell) > word.size())
        throw DomainError("window length must satisfy 1 < ell <= H");
    std::set<EllSequence> out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(ell) <= word.size(); ++i)
        out.insert({Word(word.begin() + static_cast<std::ptrdiff_t>(i),
                         word.begin() + static_cast<std::ptrdiff_t>(i) + ell)});
    return out;
}

inline std::set<EllSequence> subsequences(const Behavior& b, int ell) { return subsequences(b.word, ell); }

/// Data-driven strongest asynchronous ℓ-complete abstraction. States are sorted
/// windows; successors follow the domino rule and, because states sharing an
/// (ℓ-1)-prefix are contiguous in sorted order, each state's successor set is a
/// single index range.
class Abstraction {
public:
    Abstraction() = default;

    [[nodiscard]] int ell() const noexcept { return ell_; }
    [[nodiscard]] std::size_t alphabet_size() const noexcept { return alphabet_size_; }
    [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }
    [[nodiscard]] const std::vector<EllSequence>& states() const noexcept { return states_; }
    [[nodiscard]] const std::vector<int>& initial() const noexcept { return initial_; }
    [[nodiscard]] int output(int s) const { return states_.at(static_cast<std::size_t>(s)).window.front(); }

    /// Successor states of `s` as a half-open index range.
    [[nodiscard]] std::pair<int, int> successors(int s) const
    {
        return succ_.at(static_cast<std::size_t>(s));
    }

    [[nodiscard]] std::size_t edge_count() const
    {
        std::size_t n = 0;
        for (const auto& [b, e] : succ_) n += static_cast<std::size_t>(e - b);
        return n;
    }

    /// Index of a window, or -1.
    [[nodiscard]] int find(const Word& window) const
    {
        const EllSequence key{window};
        const auto it = std::lower_bound(states_.begin(), states_.end(), key);
        if (it == states_.end() || *it != key) return -1;
        return static_cast<int>(it - states_.begin());
    }

    [[nodiscard]] bool is_initial(int s) const { return std::binary_search(initial_.begin(), initial_.end(), s); }

    /// Source ids whose first window is the given initial state.
    [[nodiscard]] const std::vector<std::uint64_t>& provenance(int s) const
    {
        static const std::vector<std::uint64_t> empty;
        const auto it = provenance_.find(s);
        return it == provenance_.end() ? empty : it->second;
    }
    [[nodiscard]] const std::map<int, std::vector<std::uint64_t>>& provenance_map() const noexcept
    {
        return provenance_;
    }

    /// Builds from explicit states and initial windows; edges follow the domino rule.
    static Abstraction from_parts(int ell, std::size_t alphabet_size, std::vector<EllSequence> states,
                                  const std::vector<EllSequence>& initial,
                                  std::map<EllSequence, std::vector<std::uint64_t>> provenance = {})
    {
        Abstraction a;
        a.ell_ = ell;
        a.alphabet_size_ = alphabet_size;
        std::sort(states.begin(), states.end());
        states.erase(std::unique(states.begin(), states.end()), states.end());
        for (const auto& s : states) {
            if (static_cast<int>(s.window.size()) != ell) throw ShapeError("state window length differs from ell");
            for (int y : s.window)
                if (y < 0 || static_cast<std::size_t>(y) >= alphabet_size)
                    throw ShapeError("window symbol outside the alphabet");
        }
        a.states_ = std::move(states);
        for (const auto& w : initial) {
            const int i = a.find(w.window);
            if (i < 0) throw ShapeError("initial window is not a state");
            a.initial_.push_back(i);
        }
        std::sort(a.initial_.begin(), a.initial_.end());
        a.initial_.erase(std::unique(a.initial_.begin(), a.initial_.end()), a.initial_.end());
        for (auto& [w, ids] : provenance) {
            const int i = a.find(w.window);
            if (i < 0) throw ShapeError("provenance window is not a state");
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            a.provenance_[i] = std::move(ids);
        }
        a.link();
        return a;
    }

    friend bool operator==(const Abstraction& a, const Abstraction& b)
    {
        return a.ell_ == b.ell_ && a.alphabet_size_ == b.alphabet_size_ && a.states_ == b.states_ &&
               a.initial_ == b.initial_ && a.provenance_ == b.provenance_;
    }

private:
    // Domino rule: successors of s share the prefix s[1..ℓ-1]. Sorted states make
    // that set contiguous, so two binary searches per state suffice.
    void link()
    {
        succ_.assign(states_.size(), {0, 0});
        const auto prefix_less = [this](const EllSequence& st, const Word& key) {
            return std::lexicographical_compare(st.window.begin(), st.window.begin() + (ell_ - 1), key.begin(),
                                                key.end());
        };
        const auto key_less = [this](const Word& key, const EllSequence& st) {
            return std::lexicographical_compare(key.begin(), key.end(), st.window.begin(),
                                                st.window.begin() + (ell_ - 1));
        };
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const Word key(states_[i].window.begin() + 1, states_[i].window.end());
            const auto lo = std::lower_bound(states_.begin(), states_.end(), key, prefix_less);
            const auto hi = std::upper_bound(lo, states_.end(), key, key_less);
            succ_[i] = {static_cast<int>(lo - states_.begin()), static_cast<int>(hi - states_.begin())};
        }
    }

    int ell_ = 0;
    std::size_t alphabet_size_ = 0;
    std::vector<EllSequence> states_;
    std::vector<int> initial_;
    std::vector<std::pair<int, int>> succ_;
    std::map<int, std::vector<std::uint64_t>> provenance_;
};

/// Packs windows into 64-bit keys when alphabet_size^ell fits, else falls back to
/// ordered vectors.
class WindowCodec {
public:
    WindowCodec(std::size_t alphabet_size, int ell) : base_(alphabet_size), ell_(ell)
    {
        long double cap = 1.0L;
        for (int i = 0; i < ell; ++i) cap *= static_cast<long double>(alphabet_size);
        packed_ = cap < 1.8e19L;
    }
    [[nodiscard]] bool packed() const noexcept { return packed_; }
    [[nodiscard]] std::uint64_t pack(std::span<const int> w) const noexcept
    {
        std::uint64_t k = 0;
        for (int y : w) k = k * base_ + static_cast<std::uint64_t>(y);
        return k;
    }
    [[nodiscard]] Word unpack(std::uint64_t k) const
    {
        Word w(static_cast<std::size_t>(ell_));
        for (int i = ell_ - 1; i >= 0; --i) {
            w[static_cast<std::size_t>(i)] = static_cast<int>(k % base_);
            k /= base_;
        }
        return w;
    }

private:
    std::uint64_t base_;
    int ell_;
    bool packed_ = true;
};

/// Incremental window deduplication. Workers can fill separate builders and
/// merge them before finish().
class AbstractionBuilder {
public:
    AbstractionBuilder(std::size_t alphabet_size, int ell) : alphabet_size_(alphabet_size), ell_(ell), codec_(alphabet_size, ell)
    {
        if (ell < 2) throw DomainError("window length must satisfy 1 < ell <= H");
    }

    void add(const Behavior& b)
    {
        if (horizon_ == 0) horizon_ = b.word.size();
        if (b.word.size() != horizon_) throw ShapeError("behaviors have mixed lengths");
        if (static_cast<std::size_t>(ell_) > horizon_) throw DomainError("window length must satisfy 1 < ell <= H");
        for (int y : b.word)
            if (y < 0 || static_cast<std::size_t>(y) >= alphabet_size_) throw ShapeError("symbol outside the alphabet");
        const std::span<const int> w(b.word);
        for (std::size_t i = 0; i + static_cast<std::size_t>(ell_) <= horizon_; ++i) insert(w.subspan(i, static_cast<std::size_t>(ell_)));
        initial_[key_of(w.subspan(0, static_cast<std::size_t>(ell_)))].push_back(b.source_id);
        ++count_;
    }

    void merge(const AbstractionBuilder& other)
    {
        if (other.count_ == 0) return;
        if (other.ell_ != ell_ || other.alphabet_size_ != alphabet_size_) throw ShapeError("incompatible builders");
        if (horizon_ == 0) horizon_ = other.horizon_;
        if (other.horizon_ != horizon_) throw ShapeError("behaviors have mixed lengths");
        packed_.insert(other.packed_.begin(), other.packed_.end());
        wide_.insert(other.wide_.begin(), other.wide_.end());
        for (const auto& [k, ids] : other.initial_) {
            auto& dst = initial_[k];
            dst.insert(dst.end(), ids.begin(), ids.end());
        }
        count_ += other.count_;
    }

    [[nodiscard]] std::size_t behaviors() const noexcept { return count_; }
    [[nodiscard]] std::size_t horizon() const noexcept { return horizon_; }

    [[nodiscard]] Abstraction finish() const
    {
        if (count_ == 0) throw DomainError("cannot build an abstraction from zero behaviors");
        std::vector<EllSequence> states;
        states.reserve(packed_.size() + wide_.size());
        for (auto k : packed_) states.push_back({codec_.unpack(k)});
        for (const auto& w : wide_) states.push_back({w});
        std::vector<EllSequence> init;
        std::map<EllSequence, std::vector<std::uint64_t>> prov;
        for (const auto& [k, ids] : initial_) {
            EllSequence w{k.second.empty() ? codec_.unpack(k.first) : k.second};
            init.push_back(w);
            prov[w] = ids;
        }
        return Abstraction::from_parts(ell_, alphabet_size_, std::move(states), init, std::move(prov));
    }

private:
    using Key = std::pair<std::uint64_t, Word>;

    [[nodiscard]] Key key_of(std::span<const int> w) const
    {
        if (codec_.packed()) return {codec_.pack(w), {}};
        return {0, Word(w.begin(), w.end())};
    }

    void insert(std::span<const int> w)
    {
        if (codec_.packed())
            packed_.insert(codec_.pack(w));
        else
            wide_.insert(Word(w.begin(), w.end()));
    }

    std::size_t alphabet_size_;
    int ell_;
    WindowCodec codec_;
    std::size_t horizon_ = 0;
    std::size_t count_ = 0;
    std::set<std::uint64_t> packed_;
    std::set<Word> wide_;
    std::map<Key, std::vector<std::uint64_t>> initial_;
};

/// Builds the data-driven abstraction from sampled behaviors.
inline Abstraction build_salca(const std::vector<Behavior>& behaviors, int ell, std::size_t alphabet_size)
{
    if (behaviors.empty()) throw DomainError("cannot build an abstraction from zero behaviors");
    AbstractionBuilder b(alphabet_size, ell);
    for (const auto& beh : behaviors) b.add(beh);
    return b.finish();
}

/// All horizon-long output words generated from initial states: the first
/// window followed by the last symbol of each subsequent state.
inline std::set<Word> enumerate_behaviors(const Abstraction& abs, int horizon, std::size_t guard = 1'000'000)
{
    if (horizon < abs.ell()) throw DomainError("enumeration horizon must be at least ell");
    std::set<Word> out;
    std::size_t paths = 0;
    const int extra = horizon - abs.ell();
    Word word;
    auto dfs = [&](auto&& self, int s, int depth) -> void {
        if (depth == extra) {
            if (++paths > guard) throw CapacityError("behavior enumeration exceeded the path guard");
            out.insert(word);
            return;
        }
        const auto [b, e] = abs.successors(s);
        for (int t = b; t < e; ++t) {
            word.push_back(abs.states()[static_cast<std::size_t>(t)].window.back());
            self(self, t, depth + 1);
            word.pop_back();
        }
    };
    for (int s : abs.initial()) {
        word = abs.states()[static_cast<std::size_t>(s)].window;
        dfs(dfs, s, 0);
    }
    return out;
}

/// Window rendered with alphabet names.
inline std::vector<std::string> window_names(const EllSequence& w, const Alphabet& a)
{
    std::vector<std::string> out;
    for (int y : w.window) out.push_back(a.symbol(y));
    return out;
}

inline std::string window_string(const EllSequence& w, const Alphabet& a, const std::string& sep = "")
{
    std::string s;
    for (std::size_t i = 0; i < w.window.size(); ++i) {
        if (i) s += sep;
        s += a.symbol(w.window[i]);
    }
    return s;
}

inline void write_dot(std::ostream& out, const Abstraction& abs, const Alphabet& a)
{
    out << "digraph salca {\n  rankdir=LR;\n";
    for (std::size_t i = 0; i < abs.size(); ++i) {
        out << "  s" << i << " [label=\"" << window_string(abs.states()[i], a, " ") << '"';
        if (abs.is_initial(static_cast<int>(i))) out << ", shape=doublecircle";
        out << "];\n";
    }
    for (std::size_t i = 0; i < abs.size(); ++i) {
        const auto [b, e] = abs.successors(static_cast<int>(i));
        for (int t = b; t < e; ++t) out << "  s" << i << " -> s" << t << ";\n";
    }
    out << "}\n";
}

/// JSON document {ell, alphabet, states, initial, edges, provenance} with stable ordering.
inline nlohmann::json to_json(const Abstraction& abs, const Alphabet& a)
{
    if (a.size() != abs.alphabet_size()) throw ShapeError("alphabet does not match the abstraction");
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "ellcharge.abstraction";
    j["ell"] = abs.ell();
    j["alphabet"] = a.symbols();
    auto& states = j["states"] = nlohmann::json::array();
    for (const auto& s : abs.states()) states.push_back(window_names(s, a));
    j["initial"] = abs.initial();
    auto& edges = j["edges"] = nlohmann::json::array();
    for (std::size_t i = 0; i < abs.size(); ++i) {
        const auto [b, e] = abs.successors(static_cast<int>(i));
        for (int t = b; t < e; ++t) edges.push_back({static_cast<int>(i), t});
    }
    auto& prov = j["provenance"] = nlohmann::json::object();
    for (const auto& [s, ids] : abs.provenance_map()) prov[std::to_string(s)] = ids;
    return j;
}

/// Loads an abstraction document. Stored edges must equal the domino edges.
inline std::pair<Abstraction, Alphabet> abstraction_from_json(const nlohmann::json& j)
{
    if (j.value("kind", "") != "ellcharge.abstraction" || j.value("schema_version", 0) != 1)
        throw ShapeError("not a version-1 abstraction document");
    Alphabet a(j.at("alphabet").get<std::vector<std::string>>());
    const int ell = j.at("ell").get<int>();
    std::vector<EllSequence> states;
    for (const auto& s : j.at("states")) {
        EllSequence w;
        for (const auto& y : s) w.window.push_back(a.index_of(y.get<std::string>()));
        states.push_back(std::move(w));
    }
    const auto stored = states;
    std::vector<EllSequence> init;
    for (int i : j.at("initial").get<std::vector<int>>()) init.push_back(stored.at(static_cast<std::size_t>(i)));
    std::map<EllSequence, std::vector<std::uint64_t>> prov;
    if (j.contains("provenance"))
        for (const auto& [k, ids] : j.at("provenance").items())
            prov[stored.at(std::stoul(k))] = ids.get<std::vector<std::uint64_t>>();
    auto abs = Abstraction::from_parts(ell, a.size(), states, init, std::move(prov));
    if (abs.states() != stored) throw ShapeError("abstraction states are not in canonical order");
    if (j.contains("edges")) {
        std::set<std::pair<int, int>> given;
        for (const auto& e : j.at("edges")) given.emplace(e.at(0).get<int>(), e.at(1).get<int>());
        std::set<std::pair<int, int>> domino;
        for (std::size_t i = 0; i < abs.size(); ++i) {
            const auto [b, e] = abs.successors(static_cast<int>(i));
            for (int t = b; t < e; ++t) domino.emplace(static_cast<int>(i), t);
        }
        if (given != domino) throw ShapeError("stored edges violate the domino rule");
    }
    return {std::move(abs), std::move(a)};
}

}  // namespace ellcharge::abstraction
