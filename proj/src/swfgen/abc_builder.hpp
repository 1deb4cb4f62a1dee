#pragma once

#include "swfsec/abc.hpp"

#include <map>
#include <string>
#include <vector>

namespace swfsec::swfgen::detail {

/// Collects new constant-pool entries, method infos and bodies, numbered from
/// the given bases so they can be appended to an existing ABC.
class AbcBuilder {
public:
    AbcBuilder(std::uint32_t string_base, std::uint32_t ns_base, std::uint32_t mn_base, std::uint32_t method_base)
        : string_base_(string_base), ns_base_(ns_base), mn_base_(mn_base), method_base_(method_base) { }

    /// One method whose body references each entry of `refs`; returns its index.
    std::uint32_t add_reference_method(const std::map<std::string, int>& refs);
    /// One method whose body starts with an undefined opcode.
    std::uint32_t add_bad_method();

    const std::vector<Bytes>& strings() const { return strings_; }
    const std::vector<Bytes>& namespaces() const { return namespaces_; }
    const std::vector<Bytes>& multinames() const { return multinames_; }
    const std::vector<Bytes>& methods() const { return methods_; }
    const std::vector<Bytes>& bodies() const { return bodies_; }

private:
    std::uint32_t string(const std::string& s);
    std::uint32_t package(const std::string& name);
    std::uint32_t qname(const std::string& ns, const std::string& name);
    std::uint32_t add_method(const Bytes& code, std::uint32_t max_stack);

    std::uint32_t string_base_, ns_base_, mn_base_, method_base_;
    std::map<std::string, std::uint32_t> string_ids_, ns_ids_, mn_ids_;
    std::vector<Bytes> strings_, namespaces_, multinames_, methods_, bodies_;
};

/// Splits a feature key into (is_class, namespace, name); throws UnencodableName.
struct RefName {
    bool is_class = false;
    std::string ns;
    std::string name;
};
RefName split_ref(const std::string& key);

/// Re-emits `abc` (which must have parsed completely) with the builder's
/// entries appended to each section.
Bytes extend_abc(ByteView abc, const abc::AbcFile& parsed, const AbcBuilder& add);

} // namespace swfsec::swfgen::detail
