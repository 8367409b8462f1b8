// Shared helpers for the test binaries: scratch directories, CLI invocation,
// small file utilities.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace testutil {

namespace fs = std::filesystem;

// Fresh scratch directory per call, removed only by the OS tmp reaper so
// failures stay inspectable.
inline fs::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    fs::path root = fs::temp_directory_path() /
                    ("wunet_" + tag + "_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter++));
    fs::create_directories(root);
    return root;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

inline std::vector<std::string> file_lines(const fs::path& p) { return lines_of(slurp(p)); }

inline bool same_bytes(const fs::path& a, const fs::path& b) {
    return slurp(a) == slurp(b);
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI with the given argument string; env prefix (e.g.
// "SELFTEST_INJECT=dwt") may be injected before the binary name.
inline CliResult run_cli(const std::string& args, const std::string& env = "") {
    fs::path dir = scratch_dir("cli_io");
    fs::path out_f = dir / "out.txt";
    fs::path err_f = dir / "err.txt";
    std::string cmd;
    if (!env.empty()) cmd += "env " + env + " ";
    cmd += std::string(WUNET_CLI_PATH) + " " + args + " >" + out_f.string() + " 2>" +
           err_f.string();
    int status = std::system(cmd.c_str());
    CliResult r;
    if (status == -1)
        r.exit_code = -1;
    else if (WIFEXITED(status))
        r.exit_code = WEXITSTATUS(status);
    else
        r.exit_code = 128;
    r.out = slurp(out_f);
    r.err = slurp(err_f);
    return r;
}

}  // namespace testutil
