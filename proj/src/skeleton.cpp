#include "hvis/skeleton.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace hvis::data {

int SkeletonSpec::root() const {
    for (int i = 0; i < joint_count(); ++i)
        if (parents[i] < 0) return i;
    throw DataError("skeleton has no root joint");
}

std::vector<int> SkeletonSpec::joints_in_part(int part) const {
    std::vector<int> out;
    for (int i = 0; i < joint_count(); ++i)
        if (part_of[i] == part) out.push_back(i);
    return out;
}

void SkeletonSpec::validate() const {
    const int n = joint_count();
    if (n == 0) throw DataError("skeleton has no joints");
    if (static_cast<int>(parents.size()) != n || static_cast<int>(part_of.size()) != n) {
        throw DataError("skeleton arrays have inconsistent lengths");
    }
    std::set<std::string> seen;
    int roots = 0;
    for (int i = 0; i < n; ++i) {
        if (names[i].empty()) throw DataError("joint " + std::to_string(i) + " has an empty name");
        if (!seen.insert(names[i]).second) throw DataError("duplicate joint name '" + names[i] + "'");
        if (parents[i] < 0) {
            ++roots;
        } else if (parents[i] >= n) {
            throw DataError("joint '" + names[i] + "' has out-of-range parent " + std::to_string(parents[i]));
        } else if (parents[i] == i) {
            throw DataError("joint '" + names[i] + "' is its own parent");
        }
        if (part_of[i] < 0 || part_of[i] >= kPartCount) {
            throw DataError("joint '" + names[i] + "' has part id " + std::to_string(part_of[i]) +
                            " outside [0," + std::to_string(kPartCount - 1) + "]");
        }
    }
    if (roots != 1) throw DataError("skeleton must have exactly one root, found " + std::to_string(roots));
    // Walking parent chains must reach the root without revisiting a joint.
    for (int i = 0; i < n; ++i) {
        std::set<int> visited;
        int j = i;
        while (parents[j] >= 0) {
            if (!visited.insert(j).second) throw DataError("skeleton contains a parent cycle through joint '" + names[i] + "'");
            j = parents[j];
        }
    }
}

std::string SkeletonSpec::to_text() const {
    std::ostringstream out;
    out << "# joints: name parent part\n";
    for (int i = 0; i < joint_count(); ++i) {
        out << names[i] << " " << parents[i] << " " << part_of[i] << "\n";
    }
    return out.str();
}

SkeletonSpec SkeletonSpec::from_text(const std::string& text) {
    SkeletonSpec s;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream row(line);
        std::string name;
        int parent = 0, part = 0;
        if (!(row >> name >> parent >> part)) {
            throw FormatError("skeleton line " + std::to_string(line_no) + " is not 'name parent part': " + line);
        }
        std::string extra;
        if (row >> extra) {
            throw FormatError("skeleton line " + std::to_string(line_no) + " has trailing content: " + line);
        }
        s.names.push_back(name);
        s.parents.push_back(parent);
        s.part_of.push_back(part);
    }
    s.validate();
    return s;
}

SkeletonSpec SkeletonSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open skeleton file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

void SkeletonSpec::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write skeleton file: " + path.string());
    out << to_text();
}

}  // namespace hvis::data
