#include "rspn/sql.hpp"

#include "rspn/csv.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace rspn {

std::string_view to_string(Aggregate a) noexcept
{
    switch (a) {
        case Aggregate::Count: return "COUNT";
        case Aggregate::Sum: return "SUM";
        case Aggregate::Avg: return "AVG";
    }
    return "?";
}

std::string_view to_string(JoinKind k) noexcept
{
    switch (k) {
        case JoinKind::Inner: return "INNER";
        case JoinKind::Left: return "LEFT";
        case JoinKind::Right: return "RIGHT";
        case JoinKind::Full: return "FULL";
    }
    return "?";
}

TableSet Query::table_set() const
{
    TableSet s;
    for (unsigned t : tables) s.insert(t);
    return s;
}

bool Query::has_outer_join() const
{
    return std::any_of(join_kinds.begin(), join_kinds.end(), [](JoinKind k) { return k != JoinKind::Inner; });
}

unsigned column_table(const SchemaGraph &schema, std::string_view column_id)
{
    const auto dot = column_id.find('.');
    if (dot == std::string_view::npos) throw InputError("'" + std::string(column_id) + "' is not a column id");
    return schema.require_table(column_id.substr(0, dot));
}

namespace {

enum class Tok { Ident, Number, String, Symbol, End };

struct Token
{
    Tok kind = Tok::End;
    std::string text; ///< identifiers as written; symbols verbatim; strings unescaped
    std::size_t pos = 0;
    bool quoted_ident = false;
};

std::vector<Token> tokenize(std::string_view s)
{
    std::vector<Token> out;
    std::size_t i = 0;
    auto fail = [&](const std::string &msg) {
        throw UnsupportedQuery("syntax error at position " + std::to_string(i + 1) + ": " + msg);
    };
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') ++i;
            continue;
        }
        Token t;
        t.pos = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
            t.kind = Tok::Ident;
            t.text = s.substr(i, j - i);
            i = j;
        } else if (c == '"') {
            std::size_t j = i + 1;
            while (j < s.size() && s[j] != '"') ++j;
            if (j == s.size()) fail("unterminated quoted identifier");
            t.kind = Tok::Ident;
            t.quoted_ident = true;
            t.text = s.substr(i + 1, j - i - 1);
            i = j + 1;
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i;
            while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
            if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
                if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
                    j = k;
                    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
                }
            }
            t.kind = Tok::Number;
            t.text = s.substr(i, j - i);
            i = j;
        } else if (c == '\'') {
            std::string text;
            std::size_t j = i + 1;
            for (;;) {
                if (j >= s.size()) fail("unterminated string literal");
                if (s[j] == '\'') {
                    if (j + 1 < s.size() && s[j + 1] == '\'') {
                        text += '\'';
                        j += 2;
                        continue;
                    }
                    break;
                }
                text += s[j++];
            }
            t.kind = Tok::String;
            t.text = std::move(text);
            i = j + 1;
        } else {
            static const char *two[] = {"<=", ">=", "<>", "!=", "||"};
            t.kind = Tok::Symbol;
            bool matched = false;
            for (const char *op : two)
                if (s.substr(i, 2) == op) {
                    t.text = op;
                    i += 2;
                    matched = true;
                    break;
                }
            if (!matched) {
                if (std::string_view("(),*=<>;.+-/%").find(c) == std::string_view::npos)
                    fail(std::string("unexpected character '") + c + "'");
                t.text = std::string(1, c);
                ++i;
            }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.pos = s.size();
    out.push_back(end);
    return out;
}

const std::set<std::string> kReserved = {
    "select", "from",  "where",  "and",   "or",     "not",   "join",     "natural", "inner", "left",
    "right",  "full",  "outer",  "on",    "group",  "by",    "in",       "is",      "null",  "as",
    "having", "order", "limit",  "union", "exists", "cross", "distinct", "like",    "between", "using",
    "offset", "case",  "intersect", "except"};

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto &c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct ColumnRef
{
    std::string qualifier; ///< table name or alias, may be empty
    std::string name;
    std::size_t pos = 0;
};

struct Literal
{
    bool is_string = false;
    std::string text;
    double number = 0;
};

struct RawConjunct
{
    ColumnRef column;
    Op op = Op::Eq;
    std::vector<Literal> values;
    std::optional<ColumnRef> other; ///< column = column
};

struct RawJoin
{
    std::string table;
    std::string alias;
    JoinKind kind = JoinKind::Inner;
    bool comma = false;
    bool natural = false;
    std::vector<RawConjunct> on;
};

class Parser
{
    std::vector<Token> toks_;
    std::size_t p_ = 0;

  public:
    std::string select_aggregate;
    std::optional<ColumnRef> aggregate_column;
    std::vector<ColumnRef> select_columns;
    std::vector<RawJoin> from;
    std::vector<RawConjunct> where;
    std::vector<ColumnRef> group_by;

    explicit Parser(std::string_view text) : toks_(tokenize(text)) { }

    void parse()
    {
        expect_keyword("select");
        parse_select_list();
        expect_keyword("from");
        parse_from();
        if (accept_keyword("where")) parse_condition(where);
        if (accept_keyword("group")) {
            expect_keyword("by");
            do group_by.push_back(parse_column());
            while (accept_symbol(","));
        }
        reject_tail();
        accept_symbol(";");
        if (peek().kind != Tok::End) syntax("unexpected '" + peek().text + "'");
    }

  private:
    const Token &peek(std::size_t ahead = 0) const { return toks_[std::min(p_ + ahead, toks_.size() - 1)]; }
    const Token &next() { return toks_[std::min(p_++, toks_.size() - 1)]; }

    [[noreturn]] void syntax(const std::string &msg) const
    {
        throw UnsupportedQuery("syntax error at position " + std::to_string(peek().pos + 1) + ": " + msg);
    }
    [[noreturn]] static void unsupported(const std::string &what) { throw UnsupportedQuery("unsupported: " + what); }

    bool is_keyword(const Token &t, std::string_view kw) const
    {
        return t.kind == Tok::Ident && !t.quoted_ident && iequals(t.text, kw);
    }
    bool accept_keyword(std::string_view kw)
    {
        if (!is_keyword(peek(), kw)) return false;
        ++p_;
        return true;
    }
    void expect_keyword(std::string_view kw)
    {
        if (!accept_keyword(kw)) syntax("expected " + lower(kw) + ", found '" + peek().text + "'");
    }
    bool accept_symbol(std::string_view s)
    {
        if (peek().kind != Tok::Symbol || peek().text != s) return false;
        ++p_;
        return true;
    }
    void expect_symbol(std::string_view s)
    {
        if (!accept_symbol(s)) syntax("expected '" + std::string(s) + "', found '" + peek().text + "'");
    }
    bool reserved(const Token &t) const { return t.kind == Tok::Ident && !t.quoted_ident && kReserved.contains(lower(t.text)); }

    void reject_tail()
    {
        const Token &t = peek();
        if (is_keyword(t, "having")) unsupported("HAVING");
        if (is_keyword(t, "order")) unsupported("ORDER BY");
        if (is_keyword(t, "limit") || is_keyword(t, "offset")) unsupported("LIMIT");
        if (is_keyword(t, "union") || is_keyword(t, "intersect") || is_keyword(t, "except")) unsupported("set operation");
        if (is_keyword(t, "or")) unsupported("disjunction");
    }

    ColumnRef parse_column()
    {
        const Token &t = peek();
        if (t.kind != Tok::Ident || reserved(t)) syntax("expected a column, found '" + t.text + "'");
        ColumnRef c;
        c.pos = t.pos;
        c.name = next().text;
        if (accept_symbol(".")) {
            if (peek().kind != Tok::Ident) syntax("expected a column name after '.'");
            c.qualifier = c.name;
            c.name = next().text;
        }
        if (peek().kind == Tok::Symbol && peek().text == "(") unsupported("function call '" + c.name + "'");
        check_arithmetic();
        return c;
    }

    void check_arithmetic() const
    {
        const Token &t = peek();
        if (t.kind == Tok::Symbol && (t.text == "+" || t.text == "-" || t.text == "*" || t.text == "/" ||
                                      t.text == "%" || t.text == "||"))
            unsupported("arithmetic expression");
    }

    void parse_select_list()
    {
        if (accept_keyword("distinct")) unsupported("DISTINCT");
        do {
            const Token &t = peek();
            if (t.kind == Tok::Ident && peek(1).kind == Tok::Symbol && peek(1).text == "(") {
                const std::string fn = lower(t.text);
                if (fn != "count" && fn != "sum" && fn != "avg") unsupported("function '" + t.text + "'");
                if (!select_aggregate.empty()) unsupported("more than one aggregate");
                next();
                next();
                if (accept_keyword("distinct")) unsupported("DISTINCT aggregate");
                if (fn == "count") {
                    if (!accept_symbol("*")) unsupported("COUNT over a column; use COUNT(*)");
                } else {
                    aggregate_column = parse_column();
                }
                expect_symbol(")");
                check_arithmetic();
                select_aggregate = fn;
                if (accept_keyword("as")) next();
            } else {
                select_columns.push_back(parse_column());
                if (accept_keyword("as")) next();
            }
        } while (accept_symbol(","));
        if (select_aggregate.empty()) unsupported("query without an aggregate (COUNT, SUM or AVG)");
    }

    void parse_table_ref(RawJoin &j)
    {
        if (accept_symbol("(")) unsupported(is_keyword(peek(), "select") ? "nested query" : "parenthesized join");
        const Token &t = peek();
        if (t.kind != Tok::Ident) syntax("expected a table name, found '" + t.text + "'");
        j.table = next().text;
        if (accept_keyword("as")) {
            if (peek().kind != Tok::Ident) syntax("expected an alias after AS");
            j.alias = next().text;
        } else if (peek().kind == Tok::Ident && !reserved(peek())) {
            j.alias = next().text;
        }
    }

    void parse_from()
    {
        RawJoin first;
        parse_table_ref(first);
        from.push_back(std::move(first));
        for (;;) {
            RawJoin j;
            if (accept_symbol(",")) {
                j.comma = true;
                parse_table_ref(j);
                from.push_back(std::move(j));
                continue;
            }
            if (accept_keyword("cross")) unsupported("cross join");
            j.natural = accept_keyword("natural");
            if (accept_keyword("left")) j.kind = JoinKind::Left;
            else if (accept_keyword("right")) j.kind = JoinKind::Right;
            else if (accept_keyword("full")) j.kind = JoinKind::Full;
            else if (!accept_keyword("inner") && !is_keyword(peek(), "join")) {
                if (j.natural) syntax("expected JOIN after NATURAL");
                break;
            }
            if (j.kind != JoinKind::Inner) accept_keyword("outer");
            expect_keyword("join");
            parse_table_ref(j);
            if (accept_keyword("using")) unsupported("JOIN ... USING");
            if (accept_keyword("on")) {
                if (j.natural) syntax("NATURAL JOIN cannot have an ON clause");
                parse_condition(j.on);
            }
            from.push_back(std::move(j));
        }
    }

    Literal parse_literal()
    {
        Literal l;
        bool negative = false;
        if (accept_symbol("-")) negative = true;
        const Token &t = peek();
        if (t.kind == Tok::Number) {
            l.text = (negative ? "-" : "") + next().text;
            if (!parse_number(l.text, l.number)) syntax("malformed number '" + l.text + "'");
        } else if (t.kind == Tok::String && !negative) {
            l.is_string = true;
            l.text = next().text;
        } else if (is_keyword(t, "null")) {
            unsupported("comparison with NULL");
        } else if (is_keyword(t, "select") || (t.kind == Tok::Symbol && t.text == "(")) {
            unsupported("nested query");
        } else {
            syntax("expected a literal, found '" + t.text + "'");
        }
        check_arithmetic();
        return l;
    }

    bool parse_op(Op &op)
    {
        const Token &t = peek();
        if (t.kind != Tok::Symbol) return false;
        static const std::map<std::string, Op> ops = {{"=", Op::Eq},  {"<>", Op::Ne}, {"!=", Op::Ne},
                                                      {"<", Op::Lt},  {"<=", Op::Le}, {">", Op::Gt},
                                                      {">=", Op::Ge}};
        auto it = ops.find(t.text);
        if (it == ops.end()) return false;
        op = it->second;
        ++p_;
        return true;
    }

    static Op flip(Op op)
    {
        switch (op) {
            case Op::Lt: return Op::Gt;
            case Op::Le: return Op::Ge;
            case Op::Gt: return Op::Lt;
            case Op::Ge: return Op::Le;
            default: return op;
        }
    }

    void parse_condition(std::vector<RawConjunct> &out)
    {
        do {
            if (accept_keyword("not")) unsupported("negation (NOT)");
            if (accept_symbol("(")) {
                if (is_keyword(peek(), "select")) unsupported("nested query");
                parse_condition(out);
                expect_symbol(")");
            } else {
                out.push_back(parse_conjunct());
            }
            if (is_keyword(peek(), "or")) unsupported("disjunction");
        } while (accept_keyword("and"));
    }

    RawConjunct parse_conjunct()
    {
        RawConjunct c;
        if (peek().kind == Tok::Number || peek().kind == Tok::String ||
            (peek().kind == Tok::Symbol && peek().text == "-")) {
            Literal l = parse_literal();
            Op op;
            if (!parse_op(op)) syntax("expected a comparison operator");
            c.column = parse_column();
            c.op = flip(op);
            c.values.push_back(std::move(l));
            return c;
        }
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Symbol && peek(1).text == "(" && !reserved(peek()))
            unsupported("function call '" + peek().text + "'");
        c.column = parse_column();
        if (accept_keyword("is")) unsupported("IS [NOT] NULL");
        if (accept_keyword("not")) unsupported("negation (NOT)");
        if (accept_keyword("like")) unsupported("string operation (LIKE)");
        if (accept_keyword("between")) unsupported("BETWEEN; write two comparisons");
        if (accept_keyword("in")) {
            expect_symbol("(");
            if (is_keyword(peek(), "select")) unsupported("nested query");
            c.op = Op::In;
            do c.values.push_back(parse_literal());
            while (accept_symbol(","));
            expect_symbol(")");
            return c;
        }
        if (!parse_op(c.op)) syntax("expected a comparison operator after column '" + c.column.name + "'");
        if (peek().kind == Tok::Ident && !is_keyword(peek(), "null")) {
            if (c.op != Op::Eq) unsupported("non-equality comparison between columns");
            c.other = parse_column();
            return c;
        }
        c.values.push_back(parse_literal());
        return c;
    }
};

struct Resolver
{
    const SchemaGraph &schema;
    const Catalog &catalog;
    std::vector<unsigned> tables;
    std::vector<std::string> aliases;

    unsigned table_of(const ColumnRef &c) const
    {
        if (!c.qualifier.empty()) {
            for (std::size_t i = 0; i != tables.size(); ++i)
                if (iequals(aliases[i], c.qualifier) || iequals(schema.tables[tables[i]].name, c.qualifier)) {
                    if (schema.tables[tables[i]].column_index(c.name) < 0)
                        throw InputError("table '" + schema.tables[tables[i]].name + "' has no column '" + c.name +
                                         "'");
                    return tables[i];
                }
            throw InputError("unknown table or alias '" + c.qualifier + "'");
        }
        int found = -1;
        for (unsigned t : tables)
            if (schema.tables[t].column_index(c.name) >= 0) {
                if (found >= 0) throw InputError("column '" + c.name + "' is ambiguous; qualify it");
                found = int(t);
            }
        if (found < 0) throw InputError("unknown column '" + c.name + "'");
        return unsigned(found);
    }

    std::string id(const ColumnRef &c) const
    {
        const unsigned t = table_of(c);
        const auto &def = schema.tables[t];
        return base_column_id(def.name, def.column(c.name).name);
    }

    bool is_key(const ColumnRef &c) const
    {
        const unsigned t = table_of(c);
        for (const auto &k : schema.key_columns(t))
            if (iequals(k, c.name)) return true;
        return false;
    }

    const ColumnMeta &meta(const ColumnRef &c) const { return schema.tables[table_of(c)].column(c.name); }

    /// The FK edge named by an equality between two columns.
    unsigned join_edge(const ColumnRef &a, const ColumnRef &b) const
    {
        const unsigned ta = table_of(a), tb = table_of(b);
        for (unsigned e = 0; e != schema.fks.size(); ++e) {
            const auto &fk = schema.fks[e];
            const unsigned from = schema.referencing_index(fk), to = schema.referenced_index(fk);
            if (from == ta && to == tb && iequals(fk.referencing_column, a.name) && iequals(fk.referenced_column, b.name))
                return e;
            if (from == tb && to == ta && iequals(fk.referencing_column, b.name) && iequals(fk.referenced_column, a.name))
                return e;
        }
        throw UnsupportedQuery("unsupported: join condition " + schema.tables[ta].name + "." + a.name + " = " +
                               schema.tables[tb].name + "." + b.name + " does not follow a declared foreign key");
    }

    Conjunct conjunct(const RawConjunct &raw) const
    {
        const ColumnMeta &m = meta(raw.column);
        if (is_key(raw.column))
            throw UnsupportedQuery("unsupported: filter on key column '" + raw.column.name +
                                   "'; key columns are not modeled");
        Conjunct c;
        c.column = id(raw.column);
        c.op = raw.op;
        if (m.kind == ColumnKind::Continuous) {
            for (const auto &l : raw.values) {
                if (l.is_string)
                    throw UnsupportedQuery("unsupported: string literal '" + l.text + "' compared with numeric column '" +
                                           raw.column.name + "'");
                c.values.push_back(l.number);
            }
            if (c.op == Op::In) {
                std::sort(c.values.begin(), c.values.end());
                c.values.erase(std::unique(c.values.begin(), c.values.end()), c.values.end());
            }
            return c;
        }

        const Dictionary *dict = catalog.find(c.column);
        const auto code_of = [&](const Literal &l) -> std::optional<double> {
            if (!dict) return std::nullopt;
            if (auto code = dict->code(l.text)) return double(*code);
            return std::nullopt;
        };
        switch (raw.op) {
            case Op::Eq:
                if (auto code = code_of(raw.values.front())) c.values = {*code};
                else c = Conjunct{c.column, Op::In, {}};
                return c;
            case Op::Ne:
                if (auto code = code_of(raw.values.front())) c.values = {*code};
                else c = Conjunct{c.column, Op::NotNull, {}};
                return c;
            case Op::In: {
                std::vector<double> codes;
                for (const auto &l : raw.values)
                    if (auto code = code_of(l)) codes.push_back(*code);
                std::sort(codes.begin(), codes.end());
                codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
                c.values = std::move(codes);
                return c;
            }
            default: {
                /* range over strings: dictionary codes are not ordered after appends, so list the matching codes */
                std::vector<double> codes;
                const std::string &bound = raw.values.front().text;
                if (dict)
                    for (std::uint32_t code = 0; code != dict->size(); ++code) {
                        const int cmp = dict->text(code).compare(bound);
                        const bool ok = raw.op == Op::Lt ? cmp < 0 : raw.op == Op::Le ? cmp <= 0
                                      : raw.op == Op::Gt ? cmp > 0 : cmp >= 0;
                        if (ok) codes.push_back(code);
                    }
                return Conjunct{c.column, Op::In, std::move(codes)};
            }
        }
    }
};

}

namespace {

TableSet predicate_tables(const SchemaGraph &schema, const Predicate &pred)
{
    TableSet s;
    for (const auto &c : pred.conjuncts)
        if (c.op != Op::IsNull) s.insert(column_table(schema, c.column));
    return s;
}

}

TableSet Query::required_tables(const SchemaGraph &schema) const
{
    std::vector<bool> required(tables.size(), true);
    for (std::size_t i = 1; i < tables.size(); ++i) {
        switch (join_kinds[i]) {
            case JoinKind::Inner: required[i] = true; break;
            case JoinKind::Left: required[i] = false; break;
            case JoinKind::Right:
                std::fill(required.begin(), required.begin() + std::ptrdiff_t(i), false);
                required[i] = true;
                break;
            case JoinKind::Full:
                std::fill(required.begin(), required.begin() + std::ptrdiff_t(i + 1), false);
                break;
        }
    }
    TableSet out;
    for (std::size_t i = 0; i != tables.size(); ++i)
        if (required[i]) out.insert(tables[i]);
    /* WHERE comparisons never match NULL, so they turn an outer join into an inner one on that side */
    return out | (predicate_tables(schema, predicate) & table_set());
}

Query parse_query(std::string_view text, const SchemaGraph &schema, const Catalog &catalog)
{
    Parser p(text);
    p.parse();

    Query q;
    q.text = std::string(text);
    Resolver r{schema, catalog, {}, {}};
    for (const auto &j : p.from) {
        const unsigned t = schema.require_table(j.table);
        if (std::find(r.tables.begin(), r.tables.end(), t) != r.tables.end())
            throw UnsupportedQuery("unsupported: table '" + schema.tables[t].name + "' appears twice (self-join)");
        r.tables.push_back(t);
        r.aliases.push_back(j.alias);
    }
    q.tables = r.tables;
    for (const auto &j : p.from) q.join_kinds.push_back(j.kind);
    q.join_kinds.front() = JoinKind::Inner;

    /* join conditions */
    std::set<unsigned> stated;
    auto take_join_conditions = [&](const std::vector<RawConjunct> &conds, std::vector<RawConjunct> *rest) {
        for (const auto &c : conds) {
            if (c.other) stated.insert(r.join_edge(c.column, *c.other));
            else if (rest) rest->push_back(c);
            else throw UnsupportedQuery("unsupported: filter in an ON clause; move it to WHERE");
        }
    };
    std::vector<RawConjunct> filters;
    for (const auto &j : p.from) take_join_conditions(j.on, nullptr);
    take_join_conditions(p.where, &filters);

    const TableSet set = q.table_set();
    if (!schema.is_connected(set)) throw UnsupportedQuery("unsupported: cross product (tables not joined by foreign keys)");
    std::set<unsigned> implied;
    for (std::size_t i = 1; i < p.from.size(); ++i) {
        if (p.from[i].comma || !p.from[i].on.empty()) continue;
        for (std::size_t k = 0; k < i; ++k)
            if (auto e = schema.edge_between(q.tables[i], q.tables[k])) implied.insert(*e);
    }
    for (unsigned e : stated)
        if (!set.contains(schema.referencing_index(schema.fks[e])) || !set.contains(schema.referenced_index(schema.fks[e])))
            throw UnsupportedQuery("unsupported: join condition on a table not in FROM");
    for (unsigned e : schema.edges_within(set))
        if (!stated.contains(e) && !implied.contains(e))
            throw UnsupportedQuery("unsupported: cross product (no join condition between " +
                                   schema.fks[e].referencing_table + " and " + schema.fks[e].referenced_table + ")");
    for (std::size_t i = 1; i < p.from.size(); ++i)
        if (q.join_kinds[i] != JoinKind::Inner && !p.from[i].natural && p.from[i].on.empty())
            throw UnsupportedQuery("syntax error: outer join needs NATURAL or an ON clause");

    for (const auto &f : filters) q.predicate.conjuncts.push_back(r.conjunct(f));

    if (p.select_aggregate == "count") {
        q.aggregate = Aggregate::Count;
    } else {
        q.aggregate = p.select_aggregate == "sum" ? Aggregate::Sum : Aggregate::Avg;
        const ColumnMeta &m = r.meta(*p.aggregate_column);
        if (m.kind != ColumnKind::Continuous)
            throw UnsupportedQuery("unsupported: " + std::string(to_string(q.aggregate)) + " over categorical column '" +
                                   m.name + "'");
        if (r.is_key(*p.aggregate_column))
            throw UnsupportedQuery("unsupported: aggregate over key column '" + m.name + "'");
        q.aggregate_column = r.id(*p.aggregate_column);
    }

    for (const auto &g : p.group_by) {
        if (r.is_key(g)) throw UnsupportedQuery("unsupported: GROUP BY on key column '" + g.name + "'");
        const std::string id = r.id(g);
        if (std::find(q.group_by.begin(), q.group_by.end(), id) == q.group_by.end()) q.group_by.push_back(id);
    }
    for (const auto &c : p.select_columns)
        if (std::find(q.group_by.begin(), q.group_by.end(), r.id(c)) == q.group_by.end())
            throw UnsupportedQuery("unsupported: selected column '" + c.name + "' is not in GROUP BY");
    return q;
}

std::string to_sql(const Query &q, const SchemaGraph &schema, const Catalog &catalog)
{
    std::ostringstream out;
    auto literal = [&](const std::string &column, double v) {
        if (catalog.find(column)) {
            std::string s = catalog.render(column, v), esc;
            for (char c : s) esc += c == '\'' ? std::string("''") : std::string(1, c);
            return "'" + esc + "'";
        }
        std::ostringstream o;
        o.precision(17);
        o << v;
        return o.str();
    };
    out << "SELECT ";
    for (const auto &g : q.group_by) out << g << ", ";
    if (q.aggregate == Aggregate::Count) out << "COUNT(*)";
    else out << to_string(q.aggregate) << '(' << q.aggregate_column << ')';
    out << " FROM " << schema.tables[q.tables.front()].name;
    for (std::size_t i = 1; i < q.tables.size(); ++i) {
        out << " NATURAL ";
        if (q.join_kinds[i] == JoinKind::Left) out << "LEFT ";
        if (q.join_kinds[i] == JoinKind::Right) out << "RIGHT ";
        if (q.join_kinds[i] == JoinKind::Full) out << "FULL ";
        out << "JOIN " << schema.tables[q.tables[i]].name;
    }
    bool first = true;
    for (const auto &c : q.predicate.conjuncts) {
        out << (first ? " WHERE " : " AND ");
        first = false;
        out << c.column;
        switch (c.op) {
            case Op::In: {
                if (c.values.empty())
                    throw InputError("cannot render an empty IN list for column '" + c.column + "'");
                out << " IN (";
                for (std::size_t i = 0; i != c.values.size(); ++i)
                    out << (i ? ", " : "") << literal(c.column, c.values[i]);
                out << ')';
                break;
            }
            case Op::NotNull:
            case Op::IsNull: throw InputError("NULL tests have no SQL form in the supported subset");
            default: out << ' ' << (c.op == Op::Ne ? "<>" : std::string(to_string(c.op))) << ' '
                         << literal(c.column, c.values.front());
        }
    }
    if (!q.group_by.empty()) {
        out << " GROUP BY ";
        for (std::size_t i = 0; i != q.group_by.size(); ++i) out << (i ? ", " : "") << q.group_by[i];
    }
    return out.str();
}

}
