#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cpmoe {

// Flat `key = value` config text: one pair per line, '#' starts a comment,
// blank lines ignored. Typed getters overwrite the caller's default when the
// key is present. finish() rejects keys nobody asked for and reports every
// problem found, not just the first.
struct KvReader {
    std::map<std::string, std::string> kv;
    std::set<std::string> used;
    std::vector<std::string> errors;

    static KvReader from_text(const std::string& text);
    static KvReader from_file(const std::string& path);

    void get(const std::string& key, int& out);
    void get(const std::string& key, double& out);
    void get(const std::string& key, uint64_t& out);
    void get(const std::string& key, std::string& out);
    void require(const std::string& key);  // error if key absent
    void finish(const std::string& what);  // throws std::runtime_error on any error
};

}  // namespace cpmoe
