#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace ke {

// Fixed prompt templates with {placeholder} substitution. Built-in defaults
// ship as files under prompts/; a file with the same name overrides the
// built-in. Template text is part of the external interface: replay digests
// depend on it.
class PromptLibrary {
  public:
    PromptLibrary();  // built-ins only

    static PromptLibrary load(const std::filesystem::path& dir);

    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& vars) const;

    const std::string& raw(const std::string& name) const;

    static const std::map<std::string, std::string>& builtin_templates();

  private:
    std::map<std::string, std::string> templates_;
};

}  // namespace ke
