#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "meandim/caps.hpp"

namespace meandim {

struct GroupElement {
    std::vector<std::int64_t> coords;

    GroupElement() = default;
    explicit GroupElement(std::vector<std::int64_t> c) : coords(std::move(c)) {}
    static GroupElement identity(int rank) { return GroupElement(std::vector<std::int64_t>(rank, 0)); }

    int rank() const { return static_cast<int>(coords.size()); }
    std::int64_t operator[](std::size_t i) const { return coords[i]; }

    GroupElement operator+(const GroupElement& o) const;
    GroupElement operator-(const GroupElement& o) const;
    GroupElement operator-() const;
    bool operator==(const GroupElement& o) const = default;
    auto operator<=>(const GroupElement& o) const = default;  // coordinate-lexicographic
};

struct GroupElementHash {
    std::size_t operator()(const GroupElement& g) const noexcept;
};

// Z^d with generators e1 < e1^-1 < e2 < e2^-1 < ...; generator index 2*axis (+1 if inverse)
class GroupSpec {
public:
    explicit GroupSpec(int rank);
    int rank() const { return rank_; }
    int generator_count() const { return 2 * rank_; }
    GroupElement generator(int index) const;

private:
    int rank_;
};

std::int64_t word_length(const GroupElement& g);
// lexicographically least among minimal generator words
std::vector<int> minimal_word(const GroupElement& g);
bool canonical_less(const GroupElement& a, const GroupElement& b);
std::vector<GroupElement> canonical_order(std::vector<GroupElement> elements);

std::uint64_t ball_size(int rank, std::int64_t m);

enum class WindowKind { ball, box, explicit_set };

class GroupWindow {
public:
    GroupWindow() = default;

    static GroupWindow ball(std::int64_t m, const GroupSpec& spec, std::size_t cap = Caps{}.cells);
    // [0,n)^d
    static GroupWindow box(std::int64_t n, const GroupSpec& spec, std::size_t cap = Caps{}.cells);
    static GroupWindow from_elements(std::vector<GroupElement> elements, int rank,
                                     std::size_t cap = Caps{}.cells);

    const std::vector<GroupElement>& elements() const { return elements_; }
    const GroupElement& operator[](std::size_t i) const { return elements_[i]; }
    std::size_t size() const { return elements_.size(); }
    bool empty() const { return elements_.empty(); }
    int rank() const { return rank_; }
    WindowKind kind() const { return kind_; }
    std::int64_t parameter() const { return parameter_; }

    std::optional<std::size_t> index_of(const GroupElement& g) const;
    bool contains(const GroupElement& g) const { return index_.count(g) != 0; }
    GroupWindow translated(const GroupElement& g) const;
    // Minkowski sum {s + f}
    GroupWindow sum(const GroupWindow& other, std::size_t cap = Caps{}.cells) const;

private:
    GroupWindow(std::vector<GroupElement> elements, int rank, WindowKind kind, std::int64_t parameter);

    std::vector<GroupElement> elements_;
    std::unordered_map<GroupElement, std::size_t, GroupElementHash> index_;
    int rank_ = 1;
    WindowKind kind_ = WindowKind::explicit_set;
    std::int64_t parameter_ = 0;
};

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

Rational make_rational(std::int64_t num, std::int64_t den);

// |F \ gF| / |F|
Rational folner_defect(const GroupWindow& F, const GroupElement& g);

enum class FolnerFamily { balls, boxes };

struct FolnerDescriptor {
    FolnerFamily family = FolnerFamily::balls;
    std::vector<std::int64_t> indices;

    static FolnerDescriptor range(FolnerFamily family, std::int64_t first, std::int64_t last);
    GroupWindow window(std::size_t i, const GroupSpec& spec, std::size_t cap = Caps{}.cells) const;
    // strictly increasing indices give nested, exhausting windows
    bool valid() const;
};

std::string to_string(FolnerFamily f);
FolnerFamily folner_family_from_string(const std::string& s);

// F x {0..n-1}; cell i <-> (window index i / n, layer i % n)
class ProductWindow {
public:
    ProductWindow(GroupWindow base, std::int64_t layers);

    std::size_t size() const { return base_.size() * static_cast<std::size_t>(layers_); }
    const GroupWindow& base() const { return base_; }
    std::int64_t layers() const { return layers_; }
    std::size_t window_index(std::size_t cell) const { return cell / static_cast<std::size_t>(layers_); }
    std::int64_t layer(std::size_t cell) const { return static_cast<std::int64_t>(cell % static_cast<std::size_t>(layers_)); }
    GroupElement lattice_point(std::size_t cell) const;
    // the same cells as an explicit window of Z^{d+1}, last axis = layer
    GroupWindow lattice_window(std::size_t cap = Caps{}.cells) const;

private:
    GroupWindow base_;
    std::int64_t layers_;
};

nlohmann::json window_to_json(const GroupWindow& w);
GroupWindow window_from_json(const nlohmann::json& j, int rank);

}  // namespace meandim
