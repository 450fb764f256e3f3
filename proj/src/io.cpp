#include "latree/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "canonical.hpp"
#include "latree/errors.hpp"

namespace latree {

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw InvalidArgument("cannot format number");
    return std::string(buf, ptr);
}

std::string serialize(const SemiLabeledTree& tree) {
    const auto order = detail::rooted_order(tree);
    std::string out;
    out.reserve(tree.node_count() * 12);

    struct Frame {
        std::size_t node;
        std::size_t next;
    };
    auto close_node = [&](std::size_t v) {
        const NodeId id = tree.node_at(v);
        if (id.is_regular()) out += std::to_string(id.value());
        if (v != order.root) {
            out += ':';
            out += format_double(order.parent_length[v]);
        }
    };
    std::vector<Frame> stack{{order.root, 0}};
    if (!order.children[order.root].empty()) out += '(';
    while (!stack.empty()) {
        Frame& f = stack.back();
        const auto& ch = order.children[f.node];
        if (f.next < ch.size()) {
            if (f.next > 0) out += ',';
            const std::size_t c = ch[f.next++];
            if (!order.children[c].empty()) out += '(';
            stack.push_back({c, 0});
        } else {
            if (!ch.empty()) out += ')';
            close_node(f.node);
            stack.pop_back();
        }
    }
    out += ';';
    return out;
}

namespace {

class NewickParser {
public:
    explicit NewickParser(std::string_view text) : text_(text) {}

    SemiLabeledTree run() {
        std::vector<std::size_t> open;  // indices of nodes whose '(' is not yet closed
        std::optional<std::size_t> current;
        bool done = false;
        bool expect_subtree = true;
        while (!done) {
            skip_space();
            if (expect_subtree) {
                if (peek() == '(') {
                    const std::size_t idx = add_node(open);
                    open.push_back(idx);
                    ++pos_;
                    continue;
                }
                const std::size_t idx = add_node(open);
                nodes_[idx].label = parse_label();
                if (!nodes_[idx].label) fail("expected a label or '('");
                parse_length(idx);
                current = idx;
                expect_subtree = false;
                continue;
            }
            const char c = peek();
            if (c == ',') {
                if (open.empty()) fail("',' outside of parentheses");
                ++pos_;
                expect_subtree = true;
            } else if (c == ')') {
                if (open.empty()) fail("unbalanced ')'");
                ++pos_;
                const std::size_t idx = open.back();
                open.pop_back();
                skip_space();
                nodes_[idx].label = parse_label();
                parse_length(idx);
                current = idx;
            } else if (c == ';') {
                if (!open.empty()) fail("missing ')' before ';'");
                ++pos_;
                done = true;
            } else if (c == '\0') {
                fail("unexpected end of input");
            } else {
                fail(std::string("unexpected character '") + c + "'");
            }
        }
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters after ';'");
        return build(*current);
    }

private:
    struct ParsedNode {
        std::optional<std::uint32_t> label;
        std::optional<double> length;
        std::optional<std::size_t> parent;
        std::size_t children = 0;
        std::size_t offset = 0;
    };

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                       text_[pos_] == '\r')) {
            ++pos_;
        }
    }

    [[noreturn]] void fail(const std::string& message) const { fail_at(message, pos_); }

    [[noreturn]] void fail_at(const std::string& message, std::size_t offset) const {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError(message, line, column);
    }

    std::size_t add_node(const std::vector<std::size_t>& open) {
        ParsedNode node;
        node.offset = pos_;
        if (!open.empty()) {
            node.parent = open.back();
            ++nodes_[open.back()].children;
        }
        nodes_.push_back(node);
        return nodes_.size() - 1;
    }

    std::optional<std::uint32_t> parse_label() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_;
        if (pos_ == start) {
            const char c = peek();
            if (c != ':' && c != ',' && c != ')' && c != ';' && c != '\0' && c != ' ') {
                fail("labels must be nonnegative integers");
            }
            return std::nullopt;
        }
        std::uint32_t value = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc{} || value > NodeId::kMaxValue) fail_at("label out of range", start);
        return value;
    }

    void parse_length(std::size_t idx) {
        skip_space();
        if (peek() != ':') return;
        ++pos_;
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if ((c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-') {
                ++pos_;
            } else {
                break;
            }
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (start == pos_ || ec != std::errc{} || ptr != text_.data() + pos_) {
            fail_at("malformed branch length", start);
        }
        nodes_[idx].length = value;
    }

    SemiLabeledTree build(std::size_t root) {
        std::vector<NodeId> ids(nodes_.size());
        std::unordered_set<std::uint32_t> seen;
        std::uint32_t next_latent = 1;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const ParsedNode& node = nodes_[i];
            if (node.label) {
                if (!seen.insert(*node.label).second) {
                    fail_at("duplicate label " + std::to_string(*node.label), node.offset);
                }
                ids[i] = NodeId::regular(*node.label);
            } else {
                if (node.children == 0) fail_at("unlabeled leaf", node.offset);
                ids[i] = NodeId::latent(next_latent++);
            }
            if (i != root && !node.length) fail_at("missing branch length", node.offset);
        }
        std::vector<Edge> edges;
        edges.reserve(nodes_.size() - 1);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].parent) edges.push_back({ids[*nodes_[i].parent], ids[i], *nodes_[i].length});
        }
        return SemiLabeledTree(std::move(ids), std::move(edges));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<ParsedNode> nodes_;
};

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

template <typename T>
T parse_number(const std::string& cell, std::size_t line, std::size_t column) {
    T value{};
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError("malformed number '" + cell + "'", line, column);
    }
    return value;
}

} // namespace

SemiLabeledTree parse(std::string_view text) { return NewickParser(text).run(); }

void write_matrix_csv(std::ostream& out, const DistanceMatrix& matrix) {
    out << "label";
    for (auto l : matrix.labels()) out << ',' << l;
    out << '\n';
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << matrix.labels()[i];
        for (std::size_t j = 0; j < matrix.size(); ++j) out << ',' << format_double(matrix.at(i, j));
        out << '\n';
    }
}

DistanceMatrix read_matrix_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::uint32_t> labels;
    std::vector<double> values;
    bool header = true;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (header) {
            if (cells.empty() || cells[0] != "label") throw ParseError("header must start with 'label'", line_no, 1);
            for (std::size_t c = 1; c < cells.size(); ++c) {
                labels.push_back(parse_number<std::uint32_t>(cells[c], line_no, c + 1));
            }
            header = false;
            continue;
        }
        if (cells.size() != labels.size() + 1) {
            throw ParseError("expected " + std::to_string(labels.size() + 1) + " cells", line_no, 1);
        }
        if (rows >= labels.size()) throw ParseError("more rows than labels", line_no, 1);
        if (parse_number<std::uint32_t>(cells[0], line_no, 1) != labels[rows]) {
            throw ParseError("row label does not match header order", line_no, 1);
        }
        for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(parse_number<double>(cells[c], line_no, c + 1));
        ++rows;
    }
    if (header) throw ParseError("empty matrix file", line_no + 1, 1);
    if (rows != labels.size()) throw ParseError("fewer rows than labels", line_no + 1, 1);
    return DistanceMatrix(std::move(labels), std::move(values));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << contents;
    if (!out) throw InvalidArgument("write failed for " + path);
}

} // namespace latree
