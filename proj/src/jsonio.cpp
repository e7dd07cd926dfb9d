#include "morph/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace morph::json {

Value Value::boolean(bool b) {
    Value v;
    v.type_ = Type::boolean;
    v.b_ = b;
    return v;
}

Value Value::number(double d) {
    Value v;
    v.type_ = Type::number;
    v.num_ = d;
    return v;
}

Value Value::integer(std::int64_t i) {
    Value v;
    v.type_ = Type::integer;
    v.int_ = i;
    return v;
}

Value Value::string(std::string s) {
    Value v;
    v.type_ = Type::string;
    v.str_ = std::move(s);
    return v;
}

Value Value::array() {
    Value v;
    v.type_ = Type::array;
    return v;
}

Value Value::object() {
    Value v;
    v.type_ = Type::object;
    return v;
}

void Value::push_back(Value v) {
    type_ = Type::array;
    arr_.push_back(std::move(v));
}

Value& Value::operator[](const std::string& key) {
    type_ = Type::object;
    for (auto& [k, v] : obj_)
        if (k == key) return v;
    obj_.emplace_back(key, Value());
    return obj_.back().second;
}

void Value::set(const std::string& key, Value v) { (*this)[key] = std::move(v); }

namespace {

void write_escaped(std::ostream& os, const std::string& s) {
    os << '"';
    for (char c : s) {
        switch (c) {
            case '"': os << "\\\""; break;
            case '\\': os << "\\\\"; break;
            case '\n': os << "\\n"; break;
            case '\r': os << "\\r"; break;
            case '\t': os << "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    os << buf;
                } else {
                    os << c;
                }
        }
    }
    os << '"';
}

void write_number(std::ostream& os, double d) {
    if (!std::isfinite(d)) {
        os << "null";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    os << buf;
}

void pad(std::ostream& os, int indent, int depth) {
    if (indent > 0) {
        os << '\n';
        for (int i = 0; i < indent * depth; ++i) os << ' ';
    }
}

} // namespace

void Value::dump(std::ostream& os, int indent, int depth) const {
    switch (type_) {
        case Type::null: os << "null"; break;
        case Type::boolean: os << (b_ ? "true" : "false"); break;
        case Type::number: write_number(os, num_); break;
        case Type::integer: os << int_; break;
        case Type::string: write_escaped(os, str_); break;
        case Type::array: {
            os << '[';
            for (std::size_t i = 0; i < arr_.size(); ++i) {
                if (i) os << ',';
                pad(os, indent, depth + 1);
                arr_[i].dump(os, indent, depth + 1);
            }
            if (!arr_.empty()) pad(os, indent, depth);
            os << ']';
            break;
        }
        case Type::object: {
            os << '{';
            for (std::size_t i = 0; i < obj_.size(); ++i) {
                if (i) os << ',';
                pad(os, indent, depth + 1);
                write_escaped(os, obj_[i].first);
                os << (indent > 0 ? ": " : ":");
                obj_[i].second.dump(os, indent, depth + 1);
            }
            if (!obj_.empty()) pad(os, indent, depth);
            os << '}';
            break;
        }
    }
}

std::string Value::dump(int indent) const {
    std::ostringstream os;
    dump(os, indent, 0);
    return os.str();
}

Value num(double d) { return Value::number(d); }
Value integer(std::int64_t i) { return Value::integer(i); }
Value str(std::string s) { return Value::string(std::move(s)); }
Value boolean(bool b) { return Value::boolean(b); }

Value num_array(const std::vector<double>& v) {
    Value a = Value::array();
    for (double d : v) a.push_back(num(d));
    return a;
}

} // namespace morph::json
