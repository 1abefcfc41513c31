/// @brief simplicial meshes (intervals for d=1, triangles for d=2) with facet
/// topology, geometric quantities and the mesh-assumption validators.
#pragma once

#include <qtdg/errors.hpp>
#include <qtdg/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace qtdg {

enum class FacetKind { interior, dirichlet, neumann, unclassified };

/// Boundary label carried by an imported mesh file.
enum class BoundaryLabel { none, dirichlet, neumann };

struct Facet {
    std::array<int, 2> vertices{-1, -1};
    int num_vertices = 0;
    FacetKind kind = FacetKind::unclassified;
    /// elements[0] owns the normal; elements[1] == -1 on the boundary
    std::array<int, 2> elements{-1, -1};
    Vec normal;
    double diameter = 0.0;  // h_e (1 for point facets)
    double measure = 0.0;   // |e| (1 for point facets)
    BoundaryLabel label = BoundaryLabel::none;

    [[nodiscard]] bool is_boundary() const noexcept { return elements[1] < 0; }
};

struct Element {
    std::array<int, 3> vertices{-1, -1, -1};
    int num_vertices = 0;
    std::array<int, 3> facets{-1, -1, -1};
    Vec barycentre;
    double diameter = 0.0;  // h_T
    double measure = 0.0;   // |T|
    double inradius = 0.0;  // rho_T
    double perimeter = 0.0; // |dT|
};

class Mesh {
  public:
    Mesh() = default;

    /// Builds topology and geometry from raw connectivity. Triangles are
    /// reoriented counter-clockwise; interior facet normals point out of the
    /// lower-numbered element.
    static Mesh from_connectivity(int dim, std::vector<Vec> vertices, std::vector<std::vector<int>> cells,
                                  const std::vector<std::pair<std::vector<int>, BoundaryLabel>>& labels = {}) {
        if (dim != 1 && dim != 2) throw ContractError("meshes are supported for d = 1, 2");
        Mesh m;
        m.dim_ = dim;
        m.vertices_ = std::move(vertices);
        for (const auto& v : m.vertices_)
            if (v.size() != dim) throw ParseError("vertex coordinate count does not match dimension");

        std::map<std::array<int, 2>, int> facet_of;
        for (auto& cell : cells) {
            if (static_cast<int>(cell.size()) != dim + 1) throw ParseError("element needs d+1 vertex ids");
            for (int id : cell)
                if (id < 0 || id >= static_cast<int>(m.vertices_.size())) throw ParseError("vertex id out of range");
            Element el;
            el.num_vertices = dim + 1;
            if (dim == 2) {
                const Vec& a = m.vertices_[static_cast<std::size_t>(cell[0])];
                const Vec& b = m.vertices_[static_cast<std::size_t>(cell[1])];
                const Vec& c = m.vertices_[static_cast<std::size_t>(cell[2])];
                const double area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if (area2 == 0.0) throw DegenerateElement("zero-area triangle");
                if (area2 < 0.0) std::swap(cell[1], cell[2]);
            } else if (m.vertices_[static_cast<std::size_t>(cell[1])][0] < m.vertices_[static_cast<std::size_t>(cell[0])][0]) {
                std::swap(cell[0], cell[1]);
            }
            for (int k = 0; k <= dim; ++k) el.vertices[static_cast<std::size_t>(k)] = cell[static_cast<std::size_t>(k)];
            const int elem_id = static_cast<int>(m.elements_.size());

            // local facets: the point facets {v0},{v1} for d=1; edges (v0v1),(v1v2),(v2v0) for d=2
            for (int f = 0; f <= dim; ++f) {
                std::array<int, 2> key{-1, -1};
                int nv = 1;
                if (dim == 1) {
                    key = {cell[static_cast<std::size_t>(f)], -1};
                } else {
                    const int a = cell[static_cast<std::size_t>(f)];
                    const int b = cell[static_cast<std::size_t>((f + 1) % 3)];
                    key = {std::min(a, b), std::max(a, b)};
                    nv = 2;
                }
                auto it = facet_of.find(key);
                if (it == facet_of.end()) {
                    Facet fc;
                    fc.vertices = key;
                    fc.num_vertices = nv;
                    fc.elements = {elem_id, -1};
                    facet_of.emplace(key, static_cast<int>(m.facets_.size()));
                    el.facets[static_cast<std::size_t>(f)] = static_cast<int>(m.facets_.size());
                    m.facets_.push_back(fc);
                } else {
                    Facet& fc = m.facets_[static_cast<std::size_t>(it->second)];
                    if (fc.elements[1] >= 0) throw NonConformingMesh("facet shared by more than two elements");
                    fc.elements[1] = elem_id;
                    el.facets[static_cast<std::size_t>(f)] = it->second;
                }
            }
            m.elements_.push_back(el);
        }

        for (auto& el : m.elements_) m.compute_element_geometry(el);
        for (auto& fc : m.facets_) {
            m.compute_facet_geometry(fc);
            fc.kind = fc.is_boundary() ? FacetKind::unclassified : FacetKind::interior;
        }
        if (dim == 2) m.check_no_hanging_vertices();

        for (const auto& [ids, label] : labels) {
            std::array<int, 2> key{-1, -1};
            if (dim == 1) {
                if (ids.size() != 1) throw ParseError("d=1 boundary facets have one vertex id");
                key = {ids[0], -1};
            } else {
                if (ids.size() != 2) throw ParseError("d=2 boundary facets have two vertex ids");
                key = {std::min(ids[0], ids[1]), std::max(ids[0], ids[1])};
            }
            auto it = facet_of.find(key);
            if (it == facet_of.end() || !m.facets_[static_cast<std::size_t>(it->second)].is_boundary())
                throw ParseError("labelled facet is not a boundary facet of the mesh");
            m.facets_[static_cast<std::size_t>(it->second)].label = label;
        }
        return m;
    }

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<Vec>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] const std::vector<Element>& elements() const noexcept { return elements_; }
    [[nodiscard]] const std::vector<Facet>& facets() const noexcept { return facets_; }
    [[nodiscard]] std::vector<Facet>& facets() noexcept { return facets_; }
    [[nodiscard]] const Element& element(int t) const { return elements_[static_cast<std::size_t>(t)]; }
    [[nodiscard]] const Facet& facet(int f) const { return facets_[static_cast<std::size_t>(f)]; }
    [[nodiscard]] std::size_t num_elements() const noexcept { return elements_.size(); }
    [[nodiscard]] std::size_t num_facets() const noexcept { return facets_.size(); }

    /// generator input 1/n, when the mesh came from the structured generator
    [[nodiscard]] std::optional<double> h_nominal() const noexcept { return h_nominal_; }
    void set_h_nominal(double h) { h_nominal_ = h; }

    /// h = max h_T
    [[nodiscard]] double meshsize() const {
        double h = 0.0;
        for (const auto& el : elements_) h = std::max(h, el.diameter);
        return h;
    }

    /// N_boundary: maximum number of facets per element (d+1 for simplices)
    [[nodiscard]] int max_facets_per_element() const noexcept { return dim_ + 1; }

    [[nodiscard]] std::size_t num_interior_facets() const {
        return static_cast<std::size_t>(std::count_if(facets_.begin(), facets_.end(),
                                                      [](const Facet& f) { return !f.is_boundary(); }));
    }

    /// vertex coordinates of an element, in local order
    [[nodiscard]] std::vector<Vec> element_points(int t) const {
        const auto& el = element(t);
        std::vector<Vec> pts;
        for (int k = 0; k < el.num_vertices; ++k) pts.push_back(vertices_[static_cast<std::size_t>(el.vertices[static_cast<std::size_t>(k)])]);
        return pts;
    }

    [[nodiscard]] std::vector<Vec> facet_points(int f) const {
        const auto& fc = facet(f);
        std::vector<Vec> pts;
        for (int k = 0; k < fc.num_vertices; ++k) pts.push_back(vertices_[static_cast<std::size_t>(fc.vertices[static_cast<std::size_t>(k)])]);
        return pts;
    }

    /// outward normal of element t on facet f
    [[nodiscard]] Vec outward_normal(int t, int f) const {
        const auto& fc = facet(f);
        return fc.elements[0] == t ? Vec(fc.normal) : Vec(-fc.normal);
    }

  private:
    void compute_element_geometry(Element& el) const {
        const int nv = el.num_vertices;
        el.barycentre = Vec::Zero(dim_);
        for (int k = 0; k < nv; ++k) el.barycentre += vertex(el.vertices[static_cast<std::size_t>(k)]);
        el.barycentre /= nv;
        el.diameter = 0.0;
        for (int a = 0; a < nv; ++a)
            for (int b = a + 1; b < nv; ++b)
                el.diameter = std::max(el.diameter, (vertex(el.vertices[static_cast<std::size_t>(a)]) - vertex(el.vertices[static_cast<std::size_t>(b)])).norm());
        if (dim_ == 1) {
            el.measure = el.diameter;
            el.perimeter = 2.0;  // two point facets of unit measure
            el.inradius = 0.5 * el.measure;
        } else {
            const Vec& a = vertex(el.vertices[0]);
            const Vec& b = vertex(el.vertices[1]);
            const Vec& c = vertex(el.vertices[2]);
            el.measure = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
            el.perimeter = (b - a).norm() + (c - b).norm() + (a - c).norm();
            el.inradius = el.measure / (0.5 * el.perimeter);
        }
        if (!(el.measure > 0.0)) throw DegenerateElement("element with non-positive measure");
    }

    void compute_facet_geometry(Facet& fc) const {
        const Element& owner = elements_[static_cast<std::size_t>(fc.elements[0])];
        if (dim_ == 1) {
            const double x = vertex(fc.vertices[0])[0];
            fc.normal = make_vec({x > owner.barycentre[0] ? 1.0 : -1.0});
            fc.diameter = 1.0;
            fc.measure = 1.0;
            return;
        }
        const Vec& a = vertex(fc.vertices[0]);
        const Vec& b = vertex(fc.vertices[1]);
        const Vec t = b - a;
        const double len = t.norm();
        Vec n = make_vec({t[1] / len, -t[0] / len});
        if (n.dot(a - owner.barycentre) < 0.0) n = -n;
        fc.normal = n;
        fc.diameter = len;
        fc.measure = len;
    }

    void check_no_hanging_vertices() const {
        for (const auto& fc : facets_) {
            if (!fc.is_boundary()) continue;
            const Vec& a = vertex(fc.vertices[0]);
            const Vec& b = vertex(fc.vertices[1]);
            const Vec t = b - a;
            const double len2 = t.squaredNorm();
            for (std::size_t v = 0; v < vertices_.size(); ++v) {
                const int id = static_cast<int>(v);
                if (id == fc.vertices[0] || id == fc.vertices[1]) continue;
                const Vec r = vertices_[v] - a;
                const double s = r.dot(t) / len2;
                const double cross = r[0] * t[1] - r[1] * t[0];
                if (s > 1e-12 && s < 1.0 - 1e-12 && std::abs(cross) <= 1e-12 * len2)
                    throw NonConformingMesh("vertex " + std::to_string(id) + " lies inside an edge");
            }
        }
    }

    [[nodiscard]] const Vec& vertex(int id) const { return vertices_[static_cast<std::size_t>(id)]; }

    int dim_ = 0;
    std::vector<Vec> vertices_;
    std::vector<Element> elements_;
    std::vector<Facet> facets_;
    std::optional<double> h_nominal_;
};

/// Uniform mesh of the unit interval (d=1) or unit square (d=2). In 2D each of
/// the n x n cells is split along its positive-slope diagonal.
inline Mesh generate_structured(int dim, int n) {
    if (n < 1) throw ContractError("structured mesh needs n >= 1");
    std::vector<Vec> verts;
    std::vector<std::vector<int>> cells;
    const double dn = static_cast<double>(n);
    if (dim == 1) {
        for (int i = 0; i <= n; ++i) verts.push_back(make_vec({i / dn}));
        for (int i = 0; i < n; ++i) cells.push_back({i, i + 1});
    } else if (dim == 2) {
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) verts.push_back(make_vec({i / dn, j / dn}));
        auto id = [n](int i, int j) { return j * (n + 1) + i; };
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        }
    } else {
        throw ContractError("structured meshes exist for d = 1, 2");
    }
    Mesh m = Mesh::from_connectivity(dim, std::move(verts), std::move(cells));
    m.set_h_nominal(1.0 / dn);
    return m;
}

/// Copy of the mesh with every interior facet's owner swapped and its normal
/// flipped. The scheme must not depend on this choice.
inline Mesh flip_interior_orientation(Mesh m) {
    for (auto& fc : m.facets()) {
        if (fc.is_boundary()) continue;
        std::swap(fc.elements[0], fc.elements[1]);
        fc.normal = -fc.normal;
    }
    return m;
}

struct MeshQuality {
    double shape_regularity = 0.0;  // max h_T / rho_T
    double grading = 0.0;           // max h_T / h_e over e in F_T
    double chunkiness = 0.0;        // max h_T |dT| / |T|
};

/// Advisory mesh constants. In 1D the point facets carry no length, so the
/// grading uses the smaller adjacent element size as the facet scale.
inline MeshQuality validate_assumptions(const Mesh& mesh) {
    MeshQuality q;
    for (const auto& el : mesh.elements()) {
        q.shape_regularity = std::max(q.shape_regularity, el.diameter / el.inradius);
        q.chunkiness = std::max(q.chunkiness, el.diameter * el.perimeter / el.measure);
        for (int k = 0; k < el.num_vertices; ++k) {
            const auto& fc = mesh.facet(el.facets[static_cast<std::size_t>(k)]);
            double he = fc.diameter;
            if (mesh.dim() == 1) {
                he = mesh.element(fc.elements[0]).diameter;
                if (!fc.is_boundary()) he = std::min(he, mesh.element(fc.elements[1]).diameter);
            }
            q.grading = std::max(q.grading, el.diameter / he);
        }
    }
    return q;
}

// --- text format ------------------------------------------------------------

inline Mesh read_mesh(std::istream& in) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    std::size_t pos = 0;
    auto next = [&]() -> const std::string& {
        if (pos >= tokens.size()) throw ParseError("unexpected end of mesh file");
        return tokens[pos++];
    };
    auto next_int = [&]() {
        const std::string& t = next();
        try {
            std::size_t used = 0;
            int v = std::stoi(t, &used);
            if (used != t.size()) throw ParseError("bad integer '" + t + "'");
            return v;
        } catch (const std::logic_error&) {
            throw ParseError("bad integer '" + t + "'");
        }
    };
    auto next_double = [&]() {
        const std::string& t = next();
        try {
            std::size_t used = 0;
            double v = std::stod(t, &used);
            if (used != t.size()) throw ParseError("bad number '" + t + "'");
            return v;
        } catch (const std::logic_error&) {
            throw ParseError("bad number '" + t + "'");
        }
    };
    auto expect = [&](const char* kw) {
        if (next() != kw) throw ParseError(std::string("expected keyword '") + kw + "'");
    };

    expect("dim");
    const int dim = next_int();
    if (dim != 1 && dim != 2) throw ParseError("dim must be 1 or 2");
    expect("vertices");
    const int nv = next_int();
    if (nv < 0) throw ParseError("negative vertex count");
    std::vector<Vec> verts;
    for (int v = 0; v < nv; ++v) {
        Vec x(dim);
        for (int j = 0; j < dim; ++j) x[j] = next_double();
        verts.push_back(x);
    }
    expect("elements");
    const int ne = next_int();
    if (ne < 1) throw ParseError("mesh needs at least one element");
    std::vector<std::vector<int>> cells;
    for (int e = 0; e < ne; ++e) {
        std::vector<int> c;
        for (int k = 0; k <= dim; ++k) c.push_back(next_int());
        cells.push_back(c);
    }
    std::vector<std::pair<std::vector<int>, BoundaryLabel>> labels;
    if (pos < tokens.size()) {
        expect("boundary");
        const int nb = next_int();
        for (int b = 0; b < nb; ++b) {
            std::vector<int> ids;
            for (int k = 0; k < dim; ++k) ids.push_back(next_int());
            const std::string& lab = next();
            if (lab == "D") labels.emplace_back(ids, BoundaryLabel::dirichlet);
            else if (lab == "N") labels.emplace_back(ids, BoundaryLabel::neumann);
            else throw ParseError("boundary label must be D or N");
        }
    }
    if (pos != tokens.size()) throw ParseError("trailing content in mesh file");
    return Mesh::from_connectivity(dim, std::move(verts), std::move(cells), labels);
}

inline Mesh read_mesh(const std::string& text) {
    std::istringstream in(text);
    return read_mesh(in);
}

/// Writes the mesh in the text format; labelled or classified boundary facets
/// are emitted in the optional boundary section.
inline void write_mesh(std::ostream& out, const Mesh& mesh) {
    out.precision(17);
    out << "dim " << mesh.dim() << "\n";
    out << "vertices " << mesh.vertices().size() << "\n";
    for (const auto& v : mesh.vertices()) {
        for (Eigen::Index j = 0; j < v.size(); ++j) out << (j ? " " : "") << v[j];
        out << "\n";
    }
    out << "elements " << mesh.num_elements() << "\n";
    for (const auto& el : mesh.elements()) {
        for (int k = 0; k < el.num_vertices; ++k) out << (k ? " " : "") << el.vertices[static_cast<std::size_t>(k)];
        out << "\n";
    }
    std::vector<std::pair<const Facet*, char>> labelled;
    for (const auto& fc : mesh.facets()) {
        if (!fc.is_boundary()) continue;
        char c = 0;
        if (fc.kind == FacetKind::dirichlet || fc.label == BoundaryLabel::dirichlet) c = 'D';
        if (fc.kind == FacetKind::neumann || fc.label == BoundaryLabel::neumann) c = 'N';
        if (c) labelled.emplace_back(&fc, c);
    }
    if (!labelled.empty()) {
        out << "boundary " << labelled.size() << "\n";
        for (const auto& [fc, c] : labelled) {
            for (int k = 0; k < fc->num_vertices; ++k) out << fc->vertices[static_cast<std::size_t>(k)] << " ";
            out << c << "\n";
        }
    }
}

}  // namespace qtdg
