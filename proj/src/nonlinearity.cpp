#include "din/nonlinearity.hpp"

namespace din {

std::string_view to_string(NonlinearityKind kind) {
  switch (kind) {
    case NonlinearityKind::none:
      return "none";
    case NonlinearityKind::triangle:
      return "triangle";
    case NonlinearityKind::sine:
      return "sine";
  }
  return "unknown";
}

}  // namespace din
