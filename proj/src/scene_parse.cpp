// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "georef/scene.hpp"
#include "georef/util.hpp"

namespace georef {

namespace {

constexpr std::array<std::string_view, kConstructorCount> kConstructorNames = {
    "midpoint",      "intersection_line_line", "intersection_line_circle", "intersection_circle_circle",
    "foot_of_perpendicular", "tangent_point",  "point_on",                 "extension_point",
    "circle_center", "incenter",               "circumcenter",             "centroid",
};

constexpr std::array<std::string_view, kConstraintCount> kConstraintNames = {
    "parallel",    "perpendicular",  "tangent",     "on_circle",          "collinear",
    "equal_length", "equal_angle",   "angle_bisector", "is_diameter",     "is_chord",
    "is_inscribed_angle", "is_central_angle", "is_parallelogram",
};

enum class Tok { Ident, Number, String, LParen, RParen, Comma, Equals, Semi, Newline, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_blank();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (c == '\n') {
                t.kind = Tok::Newline;
                advance();
            } else if (c == '(' || c == ')' || c == ',' || c == '=' || c == ';') {
                t.kind = c == '(' ? Tok::LParen : c == ')' ? Tok::RParen : c == ',' ? Tok::Comma : c == '=' ? Tok::Equals : Tok::Semi;
                t.text = std::string(1, c);
                advance();
            } else if (c == '"') {
                t.kind = Tok::String;
                t.text = lex_string();
            } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '+') {
                t.kind = Tok::Number;
                t.text = lex_number();
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.kind = Tok::Ident;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '-'))
                    t.text.push_back(advance());
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
            }
            out.push_back(std::move(t));
        }
    }

private:
    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_blank() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    std::string lex_string() {
        int line = line_, col = col_;
        advance();
        std::string s;
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') throw ParseError("unterminated string", line, col);
            char c = advance();
            if (c == '"') return s;
            if (c == '\\') {
                if (pos_ >= src_.size()) throw ParseError("unterminated string", line, col);
                char e = advance();
                if (e == 'n')
                    s.push_back('\n');
                else
                    s.push_back(e);
            } else {
                s.push_back(c);
            }
        }
    }

    std::string lex_number() {
        std::string s;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            bool exp_sign = (c == '-' || c == '+') && !s.empty() && (s.back() == 'e' || s.back() == 'E');
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' || exp_sign ||
                ((c == '-' || c == '+') && s.empty()))
                s.push_back(advance());
            else
                break;
        }
        return s;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

bool is_point_name(const std::string& s) { return s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z'; }

bool is_letters(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < 'A' || c > 'Z') return false;
    return true;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    SceneProgram run() {
        SceneProgram prog;
        while (true) {
            skip_terminators();
            if (peek().kind == Tok::End) break;
            statement(prog);
            expect_terminator();
        }
        return prog;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    Token take() { return toks_[pos_++]; }

    [[noreturn]] void fail(const std::string& msg, const Token& at) const { throw ParseError(msg, at.line, at.column); }

    void skip_terminators() {
        while (peek().kind == Tok::Newline || peek().kind == Tok::Semi) ++pos_;
    }

    void expect_terminator() {
        auto k = peek().kind;
        if (k == Tok::Newline || k == Tok::Semi || k == Tok::End) return;
        fail("expected ';' or end of line, found '" + peek().text + "'", peek());
    }

    Token expect(Tok k, const char* what) {
        if (peek().kind != k) fail(std::string("expected ") + what, peek());
        return take();
    }

    char point_use(const Token& t) {
        if (!is_point_name(t.text)) fail("expected a point name, found '" + t.text + "'", t);
        if (!points_.count(t.text[0])) fail(std::string("point ") + t.text + " used before declaration", t);
        return t.text[0];
    }

    void statement(SceneProgram& prog) {
        Token kw = expect(Tok::Ident, "a statement keyword");
        Declaration d;
        d.stage = stage_;
        d.span = {kw.line, kw.column};
        const std::string& k = kw.text;
        if (k == "scene") {
            Token n = expect(Tok::Ident, "a scene name");
            prog.name = n.text;
            return;
        }
        if (k == "stage") {
            Token n = expect(Tok::Number, "a stage number");
            int v = 0;
            auto r = std::from_chars(n.text.data(), n.text.data() + n.text.size(), v);
            if (r.ec != std::errc{} || r.ptr != n.text.data() + n.text.size()) fail("stage must be an integer", n);
            stage_ = v;
            return;
        }
        if (k == "point") {
            Token n = expect(Tok::Ident, "a point name");
            if (!is_point_name(n.text)) fail("identifiers are single uppercase letters, found '" + n.text + "'", n);
            if (points_.count(n.text[0])) fail("duplicate identifier " + n.text, n);
            d.name = n.text[0];
            if (peek().kind == Tok::Equals) {
                take();
                Token ctor = expect(Tok::Ident, "a constructor name");
                auto c = constructor_from_name(ctor.text);
                if (!c) fail("unknown constructor '" + ctor.text + "'", ctor);
                d.kind = DeclKind::ConstructedPoint;
                d.constructor = *c;
                d.args = arg_list();
                check_signature(constructor_signature(*c, d.args), d.args, ctor);
            } else {
                d.kind = DeclKind::FreePoint;
            }
            points_.insert(d.name);
        } else if (k == "segment" || k == "line" || k == "ray") {
            d.kind = k == "segment" ? DeclKind::Segment : k == "line" ? DeclKind::Line : DeclKind::Ray;
            d.points = point_run(kw, 2, 2);
        } else if (k == "circle") {
            d.kind = DeclKind::Circle;
            d.points = point_run(kw, 2, 2);
            if (circles_.count(d.points[0])) fail(std::string("duplicate identifier circle ") + d.points[0], kw);
            circles_.insert(d.points[0]);
        } else if (k == "polygon") {
            d.kind = DeclKind::Polygon;
            d.points = point_run(kw, 3, 26);
        } else if (k == "constraint") {
            Token name = expect(Tok::Ident, "a constraint name");
            auto c = constraint_from_name(name.text);
            if (!c) fail("unknown constraint '" + name.text + "'", name);
            d.kind = DeclKind::Constraint;
            d.constraint = *c;
            d.args = arg_list();
            check_signature(constraint_signature(*c), d.args, name);
        } else if (k == "annotation") {
            d.kind = DeclKind::Annotation;
            d.text = expect(Tok::String, "a quoted annotation").text;
        } else {
            fail("unknown statement '" + k + "'", kw);
        }
        prog.declarations.push_back(std::move(d));
    }

    // Either "A B C" (separate letters) or a single run "ABC".
    std::string point_run(const Token& kw, std::size_t min, std::size_t max) {
        std::string pts;
        while (peek().kind == Tok::Ident && is_letters(peek().text)) {
            Token t = take();
            for (char c : t.text) {
                Token one = t;
                one.text = std::string(1, c);
                pts.push_back(point_use(one));
            }
        }
        if (pts.size() < min || pts.size() > max)
            fail(kw.text + " expects " + (min == max ? std::to_string(min) : "at least " + std::to_string(min)) +
                     " points, found " + std::to_string(pts.size()),
                 kw);
        return pts;
    }

    std::vector<Arg> arg_list() {
        expect(Tok::LParen, "'('");
        std::vector<Arg> args;
        if (peek().kind == Tok::RParen) {
            take();
            return args;
        }
        while (true) {
            args.push_back(arg());
            if (peek().kind == Tok::Comma) {
                take();
                continue;
            }
            expect(Tok::RParen, "',' or ')'");
            return args;
        }
    }

    Arg arg() {
        Arg a;
        Token t = take();
        arg_tokens_.push_back(t);
        if (t.kind == Tok::Number) {
            double v = 0;
            auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
            if (r.ec != std::errc{} || r.ptr != t.text.data() + t.text.size()) fail("malformed number '" + t.text + "'", t);
            a.type = ArgType::Number;
            a.number = v;
            return a;
        }
        if (t.kind != Tok::Ident) fail("expected an argument", t);
        if (t.text == "circle") {
            Token c = expect(Tok::Ident, "a circle center");
            if (!is_point_name(c.text)) fail("expected a circle center letter", c);
            if (!circles_.count(c.text[0])) fail("circle " + c.text + " used before declaration", c);
            a.type = ArgType::Circle;
            a.letters = c.text;
            return a;
        }
        if (!is_letters(t.text) || t.text.size() > 4) fail("expected point letters, found '" + t.text + "'", t);
        for (char c : t.text) {
            Token one = t;
            one.text = std::string(1, c);
            point_use(one);
        }
        static constexpr ArgType by_len[] = {ArgType::Point, ArgType::Point, ArgType::Pair, ArgType::Angle, ArgType::Quad};
        a.type = by_len[t.text.size()];
        a.letters = t.text;
        return a;
    }

    void check_signature(const std::vector<ArgType>& sig, std::vector<Arg>& args, const Token& at) {
        std::size_t first = arg_tokens_.size() - args.size();
        if (sig.size() != args.size())
            fail(at.text + " expects " + std::to_string(sig.size()) + " arguments, found " + std::to_string(args.size()), at);
        for (std::size_t i = 0; i < sig.size(); ++i) {
            const Token& tok = arg_tokens_[first + i];
            if (sig[i] == ArgType::Branch && args[i].type == ArgType::Number) {
                double v = args[i].number;
                if (v != static_cast<double>(static_cast<long long>(v))) fail("branch selector must be an integer", tok);
                args[i].type = ArgType::Branch;
                continue;
            }
            if (sig[i] != args[i].type) fail(at.text + ": argument " + std::to_string(i + 1) + " has the wrong kind", tok);
        }
    }

    std::vector<Token> toks_;
    std::vector<Token> arg_tokens_;
    std::size_t pos_ = 0;
    int stage_ = 1;
    std::set<char> points_;
    std::set<char> circles_;
};

std::string print_arg(const Arg& a) {
    switch (a.type) {
        case ArgType::Circle: return "circle " + a.letters;
        case ArgType::Number: return format_double(a.number);
        case ArgType::Branch: return std::to_string(static_cast<long long>(a.number));
        default: return a.letters;
    }
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out.push_back(c);
    }
    return out + "\"";
}

std::string spaced(const std::string& pts) {
    std::string out;
    for (char c : pts) {
        if (!out.empty()) out.push_back(' ');
        out.push_back(c);
    }
    return out;
}

}  // namespace

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg), line_(line), column_(column) {}

std::string_view constructor_name(Constructor c) { return kConstructorNames[static_cast<int>(c)]; }

std::optional<Constructor> constructor_from_name(std::string_view s) {
    for (int i = 0; i < kConstructorCount; ++i)
        if (kConstructorNames[i] == s) return static_cast<Constructor>(i);
    return std::nullopt;
}

std::string_view constraint_name(ConstraintKind k) { return kConstraintNames[static_cast<int>(k)]; }

std::optional<ConstraintKind> constraint_from_name(std::string_view s) {
    for (int i = 0; i < kConstraintCount; ++i)
        if (kConstraintNames[i] == s) return static_cast<ConstraintKind>(i);
    return std::nullopt;
}

std::string_view decl_kind_name(DeclKind k) {
    static constexpr std::string_view names[] = {"FreePoint", "ConstructedPoint", "Segment",    "Line",      "Ray",
                                                 "Circle",    "Polygon",          "Constraint", "Annotation"};
    return names[static_cast<int>(k)];
}

std::vector<ArgType> constructor_signature(Constructor c, const std::vector<Arg>& actual) {
    using A = ArgType;
    switch (c) {
        case Constructor::Midpoint: return {A::Point, A::Point};
        case Constructor::IntersectionLineLine: return {A::Pair, A::Pair};
        case Constructor::IntersectionLineCircle: return {A::Pair, A::Circle, A::Branch};
        case Constructor::IntersectionCircleCircle: return {A::Circle, A::Circle, A::Branch};
        case Constructor::FootOfPerpendicular: return {A::Point, A::Pair};
        case Constructor::TangentPoint: return {A::Point, A::Circle, A::Branch};
        case Constructor::PointOn: {
            A host = !actual.empty() && actual[0].type == A::Circle ? A::Circle : A::Pair;
            if (actual.size() >= 2) return {host, A::Number};
            return {host};
        }
        case Constructor::ExtensionPoint: return {A::Pair, A::Number};
        case Constructor::CircleCenter:
        case Constructor::Incenter:
        case Constructor::Circumcenter:
        case Constructor::Centroid: return {A::Point, A::Point, A::Point};
    }
    return {};
}

std::vector<ArgType> constraint_signature(ConstraintKind k) {
    using A = ArgType;
    switch (k) {
        case ConstraintKind::Parallel:
        case ConstraintKind::Perpendicular:
        case ConstraintKind::EqualLength: return {A::Pair, A::Pair};
        case ConstraintKind::Tangent:
        case ConstraintKind::IsDiameter:
        case ConstraintKind::IsChord: return {A::Pair, A::Circle};
        case ConstraintKind::OnCircle: return {A::Point, A::Circle};
        case ConstraintKind::Collinear: return {A::Point, A::Point, A::Point};
        case ConstraintKind::EqualAngle: return {A::Angle, A::Angle};
        case ConstraintKind::AngleBisector: return {A::Angle, A::Point};
        case ConstraintKind::IsInscribedAngle:
        case ConstraintKind::IsCentralAngle: return {A::Angle, A::Circle};
        case ConstraintKind::IsParallelogram: return {A::Quad};
    }
    return {};
}

std::string SceneProgram::point_letters() const {
    std::string out;
    for (const auto& d : declarations)
        if (d.kind == DeclKind::FreePoint || d.kind == DeclKind::ConstructedPoint) out.push_back(d.name);
    return out;
}

const Declaration* SceneProgram::find_point(char letter) const {
    for (const auto& d : declarations)
        if ((d.kind == DeclKind::FreePoint || d.kind == DeclKind::ConstructedPoint) && d.name == letter) return &d;
    return nullptr;
}

const Declaration* SceneProgram::find_circle(char center) const {
    for (const auto& d : declarations)
        if (d.kind == DeclKind::Circle && d.points[0] == center) return &d;
    return nullptr;
}

SceneProgram parse_program(std::string_view text) {
    Lexer lex(text);
    Parser parser(lex.run());
    return parser.run();
}

SceneProgram load_program(const std::string& path) { return parse_program(read_file(path)); }

std::string print_program(const SceneProgram& p) {
    std::ostringstream out;
    if (!p.name.empty()) out << "scene " << p.name << "\n";
    int stage = 1;
    for (const auto& d : p.declarations) {
        if (d.stage != stage) {
            out << "stage " << d.stage << "\n";
            stage = d.stage;
        }
        switch (d.kind) {
            case DeclKind::FreePoint: out << "point " << d.name; break;
            case DeclKind::ConstructedPoint: {
                out << "point " << d.name << " = " << constructor_name(d.constructor) << "(";
                for (std::size_t i = 0; i < d.args.size(); ++i) out << (i ? ", " : "") << print_arg(d.args[i]);
                out << ")";
                break;
            }
            case DeclKind::Segment: out << "segment " << spaced(d.points); break;
            case DeclKind::Line: out << "line " << spaced(d.points); break;
            case DeclKind::Ray: out << "ray " << spaced(d.points); break;
            case DeclKind::Circle: out << "circle " << spaced(d.points); break;
            case DeclKind::Polygon: out << "polygon " << spaced(d.points); break;
            case DeclKind::Constraint: {
                out << "constraint " << constraint_name(d.constraint) << "(";
                for (std::size_t i = 0; i < d.args.size(); ++i) out << (i ? ", " : "") << print_arg(d.args[i]);
                out << ")";
                break;
            }
            case DeclKind::Annotation: out << "annotation " << quote(d.text); break;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace georef
