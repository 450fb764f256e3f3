#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace latree {

/// Identifier of a tree node: either a regular node carrying an external label,
/// or a latent node carrying a synthetic id. Packed into 32 bits, with the top
/// bit set for latent nodes, so regular nodes order before latent ones.
class NodeId {
public:
    static constexpr std::uint32_t kLatentBit = 0x80000000u;
    static constexpr std::uint32_t kMaxValue = kLatentBit - 1;

    constexpr NodeId() = default;

    static constexpr NodeId regular(std::uint32_t label) { return NodeId(label & kMaxValue); }
    static constexpr NodeId latent(std::uint32_t id) { return NodeId((id & kMaxValue) | kLatentBit); }
    static constexpr NodeId from_raw(std::uint32_t raw) { return NodeId(raw); }

    constexpr bool is_regular() const { return (raw_ & kLatentBit) == 0; }
    constexpr bool is_latent() const { return !is_regular(); }
    /// Label of a regular node, or the synthetic id of a latent node.
    constexpr std::uint32_t value() const { return raw_ & kMaxValue; }
    constexpr std::uint32_t raw() const { return raw_; }

    constexpr auto operator<=>(const NodeId&) const = default;

    /// "7" for regular label 7, "h3" for latent id 3.
    std::string to_string() const {
        return is_regular() ? std::to_string(value()) : "h" + std::to_string(value());
    }

private:
    constexpr explicit NodeId(std::uint32_t raw) : raw_(raw) {}
    std::uint32_t raw_ = 0;
};

/// Order-independent 64-bit key for an unordered pair of nodes.
constexpr std::uint64_t pair_key(NodeId u, NodeId v) {
    std::uint64_t a = u.raw();
    std::uint64_t b = v.raw();
    if (a > b) std::swap(a, b);
    return (a << 32) | b;
}

} // namespace latree

template <>
struct std::hash<latree::NodeId> {
    std::size_t operator()(latree::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.raw()); }
};
