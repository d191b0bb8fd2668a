#pragma once

#include <string>

#include "clonecheck/lang.hpp"
#include "clonecheck/parser.hpp"

namespace testing_support {

inline clonecheck::Program program(const std::string& text) {
  return clonecheck::resolve_program(clonecheck::parse_program({"test.cp", text}));
}

inline std::string corpus_path(const std::string& name) {
  return std::string(CLONECHECK_CORPUS_DIR) + "/" + name;
}

inline std::string fixture_path(const std::string& name) {
  return std::string(CLONECHECK_FIXTURE_DIR) + "/" + name;
}

inline clonecheck::Program load(const std::string& path) {
  return clonecheck::resolve_program(
      clonecheck::parse_program(clonecheck::read_source_file(path)));
}

inline clonecheck::Program corpus(const std::string& name) {
  return load(corpus_path(name));
}

}  // namespace testing_support
