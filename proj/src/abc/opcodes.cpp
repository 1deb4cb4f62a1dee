#include "swfsec/abc.hpp"

namespace swfsec::abc {

namespace {

using O = Operand;

struct Def {
    std::uint8_t code;
    std::string_view name;
    std::initializer_list<Operand> operands;
};

// Documented AVM2 instruction set, plus the Alchemy memory opcodes that
// real-world compilers emit. Anything absent is treated as unknown.
const Def kDefs[] = {
    {0x01, "bkpt", {}},
    {0x02, "nop", {}},
    {0x03, "throw", {}},
    {0x04, "getsuper", {O::Multiname}},
    {0x05, "setsuper", {O::Multiname}},
    {0x06, "dxns", {O::U30}},
    {0x07, "dxnslate", {}},
    {0x08, "kill", {O::U30}},
    {0x09, "label", {}},
    {0x0C, "ifnlt", {O::S24}},
    {0x0D, "ifnle", {O::S24}},
    {0x0E, "ifngt", {O::S24}},
    {0x0F, "ifnge", {O::S24}},
    {0x10, "jump", {O::S24}},
    {0x11, "iftrue", {O::S24}},
    {0x12, "iffalse", {O::S24}},
    {0x13, "ifeq", {O::S24}},
    {0x14, "ifne", {O::S24}},
    {0x15, "iflt", {O::S24}},
    {0x16, "ifle", {O::S24}},
    {0x17, "ifgt", {O::S24}},
    {0x18, "ifge", {O::S24}},
    {0x19, "ifstricteq", {O::S24}},
    {0x1A, "ifstrictne", {O::S24}},
    {0x1B, "lookupswitch", {}}, // variable length, decoded specially
    {0x1C, "pushwith", {}},
    {0x1D, "popscope", {}},
    {0x1E, "nextname", {}},
    {0x1F, "hasnext", {}},
    {0x20, "pushnull", {}},
    {0x21, "pushundefined", {}},
    {0x23, "nextvalue", {}},
    {0x24, "pushbyte", {O::U8}},
    {0x25, "pushshort", {O::U30}},
    {0x26, "pushtrue", {}},
    {0x27, "pushfalse", {}},
    {0x28, "pushnan", {}},
    {0x29, "pop", {}},
    {0x2A, "dup", {}},
    {0x2B, "swap", {}},
    {0x2C, "pushstring", {O::U30}},
    {0x2D, "pushint", {O::U30}},
    {0x2E, "pushuint", {O::U30}},
    {0x2F, "pushdouble", {O::U30}},
    {0x30, "pushscope", {}},
    {0x31, "pushnamespace", {O::U30}},
    {0x32, "hasnext2", {O::U30, O::U30}},
    {0x35, "li8", {}},
    {0x36, "li16", {}},
    {0x37, "li32", {}},
    {0x38, "lf32", {}},
    {0x39, "lf64", {}},
    {0x3A, "si8", {}},
    {0x3B, "si16", {}},
    {0x3C, "si32", {}},
    {0x3D, "sf32", {}},
    {0x3E, "sf64", {}},
    {0x40, "newfunction", {O::U30}},
    {0x41, "call", {O::U30}},
    {0x42, "construct", {O::U30}},
    {0x43, "callmethod", {O::U30, O::U30}},
    {0x44, "callstatic", {O::U30, O::U30}},
    {0x45, "callsuper", {O::Multiname, O::U30}},
    {0x46, "callproperty", {O::Multiname, O::U30}},
    {0x47, "returnvoid", {}},
    {0x48, "returnvalue", {}},
    {0x49, "constructsuper", {O::U30}},
    {0x4A, "constructprop", {O::Multiname, O::U30}},
    {0x4C, "callproplex", {O::Multiname, O::U30}},
    {0x4E, "callsupervoid", {O::Multiname, O::U30}},
    {0x4F, "callpropvoid", {O::Multiname, O::U30}},
    {0x50, "sxi1", {}},
    {0x51, "sxi8", {}},
    {0x52, "sxi16", {}},
    {0x53, "applytype", {O::U30}},
    {0x55, "newobject", {O::U30}},
    {0x56, "newarray", {O::U30}},
    {0x57, "newactivation", {}},
    {0x58, "newclass", {O::U30}},
    {0x59, "getdescendants", {O::Multiname}},
    {0x5A, "newcatch", {O::U30}},
    {0x5D, "findpropstrict", {O::Multiname}},
    {0x5E, "findproperty", {O::Multiname}},
    {0x5F, "finddef", {O::Multiname}},
    {0x60, "getlex", {O::Multiname}},
    {0x61, "setproperty", {O::Multiname}},
    {0x62, "getlocal", {O::U30}},
    {0x63, "setlocal", {O::U30}},
    {0x64, "getglobalscope", {}},
    {0x65, "getscopeobject", {O::U8}},
    {0x66, "getproperty", {O::Multiname}},
    {0x67, "getouterscope", {O::U30}},
    {0x68, "initproperty", {O::Multiname}},
    {0x6A, "deleteproperty", {O::Multiname}},
    {0x6C, "getslot", {O::U30}},
    {0x6D, "setslot", {O::U30}},
    {0x6E, "getglobalslot", {O::U30}},
    {0x6F, "setglobalslot", {O::U30}},
    {0x70, "convert_s", {}},
    {0x71, "esc_xelem", {}},
    {0x72, "esc_xattr", {}},
    {0x73, "convert_i", {}},
    {0x74, "convert_u", {}},
    {0x75, "convert_d", {}},
    {0x76, "convert_b", {}},
    {0x77, "convert_o", {}},
    {0x78, "checkfilter", {}},
    {0x80, "coerce", {O::Multiname}},
    {0x81, "coerce_b", {}},
    {0x82, "coerce_a", {}},
    {0x83, "coerce_i", {}},
    {0x84, "coerce_d", {}},
    {0x85, "coerce_s", {}},
    {0x86, "astype", {O::Multiname}},
    {0x87, "astypelate", {}},
    {0x88, "coerce_u", {}},
    {0x89, "coerce_o", {}},
    {0x90, "negate", {}},
    {0x91, "increment", {}},
    {0x92, "inclocal", {O::U30}},
    {0x93, "decrement", {}},
    {0x94, "declocal", {O::U30}},
    {0x95, "typeof", {}},
    {0x96, "not", {}},
    {0x97, "bitnot", {}},
    {0xA0, "add", {}},
    {0xA1, "subtract", {}},
    {0xA2, "multiply", {}},
    {0xA3, "divide", {}},
    {0xA4, "modulo", {}},
    {0xA5, "lshift", {}},
    {0xA6, "rshift", {}},
    {0xA7, "urshift", {}},
    {0xA8, "bitand", {}},
    {0xA9, "bitor", {}},
    {0xAA, "bitxor", {}},
    {0xAB, "equals", {}},
    {0xAC, "strictequals", {}},
    {0xAD, "lessthan", {}},
    {0xAE, "lessequals", {}},
    {0xAF, "greaterthan", {}},
    {0xB0, "greaterequals", {}},
    {0xB1, "instanceof", {}},
    {0xB2, "istype", {O::Multiname}},
    {0xB3, "istypelate", {}},
    {0xB4, "in", {}},
    {0xC0, "increment_i", {}},
    {0xC1, "decrement_i", {}},
    {0xC2, "inclocal_i", {O::U30}},
    {0xC3, "declocal_i", {O::U30}},
    {0xC4, "negate_i", {}},
    {0xC5, "add_i", {}},
    {0xC6, "subtract_i", {}},
    {0xC7, "multiply_i", {}},
    {0xD0, "getlocal_0", {}},
    {0xD1, "getlocal_1", {}},
    {0xD2, "getlocal_2", {}},
    {0xD3, "getlocal_3", {}},
    {0xD4, "setlocal_0", {}},
    {0xD5, "setlocal_1", {}},
    {0xD6, "setlocal_2", {}},
    {0xD7, "setlocal_3", {}},
    {0xEF, "debug", {O::U8, O::U30, O::U8, O::U30}},
    {0xF0, "debugline", {O::U30}},
    {0xF1, "debugfile", {O::U30}},
    {0xF2, "bkptline", {O::U30}},
    {0xF3, "timestamp", {}},
};

std::array<OpcodeInfo, 256> build_table() {
    std::array<OpcodeInfo, 256> table{};
    for (const auto& def : kDefs) {
        OpcodeInfo& info = table[def.code];
        info.name = def.name;
        info.valid = true;
        for (auto op : def.operands)
            info.operands[info.operand_count++] = op;
    }
    return table;
}

} // namespace

const OpcodeInfo& opcode_info(std::uint8_t opcode) {
    static const std::array<OpcodeInfo, 256> table = build_table();
    return table[opcode];
}

} // namespace swfsec::abc
