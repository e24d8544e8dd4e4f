#pragma once

#include <string_view>

// Defined in a file generated at configure time from core/templates/ and
// core/data/.
namespace structsql::resources {

extern const std::string_view kQpCotTemplate;
extern const std::string_view kCotTemplate;
extern const std::string_view kDirectTemplate;
extern const std::string_view kSqliteKeywords;

}  // namespace structsql::resources
