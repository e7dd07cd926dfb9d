#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace morph::json {

/// Minimal ordered JSON document builder. Object keys keep insertion order
/// and doubles print with 17 significant digits, so a report re-emitted from
/// the same inputs and seed is byte-identical. Non-finite doubles serialize
/// as null.
class Value {
public:
    enum class Type { null, boolean, number, integer, string, array, object };

    Value() : type_(Type::null) {}
    static Value boolean(bool b);
    static Value number(double d);
    static Value integer(std::int64_t i);
    static Value string(std::string s);
    static Value array();
    static Value object();

    Type type() const { return type_; }

    void push_back(Value v);                    // arrays
    Value& operator[](const std::string& key);  // objects: insert or fetch
    void set(const std::string& key, Value v);

    void dump(std::ostream& os, int indent = 0, int depth = 0) const;
    std::string dump(int indent = 0) const;

private:
    Type type_;
    bool b_ = false;
    double num_ = 0.0;
    std::int64_t int_ = 0;
    std::string str_;
    std::vector<Value> arr_;
    std::vector<std::pair<std::string, Value>> obj_;
};

Value num(double d);
Value integer(std::int64_t i);
Value str(std::string s);
Value boolean(bool b);

/// Double array helper.
Value num_array(const std::vector<double>& v);

} // namespace morph::json
