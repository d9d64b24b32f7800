#include <fstream>

#include "json.hpp"
#include "sdeit/mesh.hpp"

namespace sdeit {

using nlohmann::json;

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError(MeshError::Kind::parse, "cannot open mesh file " + path.string());

  Mesh mesh;
  try {
    const json doc = json::parse(in);
    if (doc.contains("units") && doc.at("units").get<std::string>() != "cm") {
      throw MeshError(MeshError::Kind::parse, "mesh units must be \"cm\"");
    }
    for (const auto& p : doc.at("nodes")) {
      if (p.size() != 2) throw MeshError(MeshError::Kind::parse, "node entries must be [x, y]");
      mesh.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    for (const auto& t : doc.at("elements")) {
      if (t.size() != 3) throw MeshError(MeshError::Kind::parse, "element entries must be [i, j, k]");
      mesh.elements.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    }
    for (const auto& group : doc.at("electrodes")) {
      ElectrodeEdges edges;
      for (const auto& e : group) {
        if (e.size() != 2) throw MeshError(MeshError::Kind::parse, "electrode edges must be [i, j]");
        edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
      }
      mesh.electrodes.push_back(std::move(edges));
    }
    mesh.domain_kind = doc.value("domain", std::string("polygon")) == "disk" ? DomainKind::disk
                                                                             : DomainKind::polygon;
  } catch (const json::exception& e) {
    throw MeshError(MeshError::Kind::parse, path.string() + ": " + e.what());
  }
  validate_mesh(mesh);
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  json doc;
  doc["units"] = "cm";
  doc["domain"] = mesh.domain_kind == DomainKind::disk ? "disk" : "polygon";
  json nodes = json::array();
  for (const auto& p : mesh.nodes) nodes.push_back({p.x, p.y});
  json elements = json::array();
  for (const auto& t : mesh.elements) elements.push_back({t[0], t[1], t[2]});
  json electrodes = json::array();
  for (const auto& group : mesh.electrodes) {
    json g = json::array();
    for (const auto& e : group) g.push_back({e[0], e[1]});
    electrodes.push_back(std::move(g));
  }
  doc["nodes"] = std::move(nodes);
  doc["elements"] = std::move(elements);
  doc["electrodes"] = std::move(electrodes);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file " + path.string());
  out << doc.dump() << '\n';
}

}  // namespace sdeit
