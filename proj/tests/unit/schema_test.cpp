#include <gtest/gtest.h>

#include "privlabel/error.hpp"
#include "privlabel/schema.hpp"
#include "support.hpp"

using namespace privlabel;
using nlohmann::json;

TEST(Schema, TypesAndRequired) {
  JsonSchema s(json::parse(R"({
    "type": "object",
    "required": ["a"],
    "properties": {
      "a": {"type": "integer", "minimum": 0, "maximum": 5},
      "b": {"type": ["string", "null"], "minLength": 2},
      "c": {"type": "number", "exclusiveMinimum": 0}
    }
  })"));
  EXPECT_TRUE(s.is_valid(json{{"a", 3}}));
  EXPECT_TRUE(s.is_valid(json{{"a", 0}, {"b", nullptr}, {"c", 0.1}}));
  EXPECT_FALSE(s.is_valid(json{{"b", "xx"}}));
  EXPECT_FALSE(s.is_valid(json{{"a", 1.5}}));
  EXPECT_FALSE(s.is_valid(json{{"a", -1}}));
  EXPECT_FALSE(s.is_valid(json{{"a", 6}}));
  EXPECT_FALSE(s.is_valid(json{{"a", 1}, {"b", "x"}}));
  EXPECT_FALSE(s.is_valid(json{{"a", 1}, {"c", 0}}));
  EXPECT_FALSE(s.is_valid(json::array()));
}

TEST(Schema, ErrorsCarryPointers) {
  JsonSchema s(json::parse(R"({"type":"object","properties":{"x":{"type":"array","items":{"type":"string"}}}})"));
  const auto errs = s.validate(json{{"x", {"ok", 3}}});
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0].rfind("/x/1", 0), 0u) << errs[0];
}

TEST(Schema, EnumConstAndAdditionalProperties) {
  JsonSchema s(json::parse(R"({
    "type": "object",
    "additionalProperties": false,
    "properties": {"k": {"enum": ["up", "down"]}, "v": {"const": "ok"}}
  })"));
  EXPECT_TRUE(s.is_valid(json{{"k", "up"}, {"v", "ok"}}));
  EXPECT_FALSE(s.is_valid(json{{"k", "left"}}));
  EXPECT_FALSE(s.is_valid(json{{"v", "no"}}));
  EXPECT_FALSE(s.is_valid(json{{"extra", 1}}));
  JsonSchema typed(json::parse(R"({"type":"object","additionalProperties":{"type":"integer"}})"));
  EXPECT_TRUE(typed.is_valid(json{{"a", 1}, {"b", 2}}));
  EXPECT_FALSE(typed.is_valid(json{{"a", "1"}}));
}

TEST(Schema, ArraysAndReferences) {
  JsonSchema s(json::parse(R"({
    "definitions": {"pos": {"type": "integer", "minimum": 1}},
    "$defs": {"name": {"type": "string", "minLength": 1}},
    "type": "object",
    "properties": {
      "xs": {"type": "array", "items": {"$ref": "#/definitions/pos"}, "minItems": 1, "maxItems": 3},
      "n": {"$ref": "#/$defs/name"}
    }
  })"));
  EXPECT_TRUE(s.is_valid(json{{"xs", {1, 2}}, {"n", "a"}}));
  EXPECT_FALSE(s.is_valid(json{{"xs", json::array()}}));
  EXPECT_FALSE(s.is_valid(json{{"xs", {1, 2, 3, 4}}}));
  EXPECT_FALSE(s.is_valid(json{{"xs", {0}}}));
  EXPECT_FALSE(s.is_valid(json{{"n", ""}}));
}

TEST(Schema, BooleanIsNotInteger) {
  JsonSchema s(json::parse(R"({"type":"integer"})"));
  EXPECT_FALSE(s.is_valid(json(true)));
  EXPECT_TRUE(s.is_valid(json(3)));
  EXPECT_TRUE(JsonSchema(json::parse(R"({"type":"number"})")).is_valid(json(3)));
}

TEST(Schema, PublishedSchemasLoad) {
  for (const auto& entry : std::filesystem::directory_iterator(testsupport::schema_dir())) {
    EXPECT_NO_THROW(JsonSchema::load(entry.path())) << entry.path();
  }
  EXPECT_THROW(JsonSchema::load(testsupport::schema_dir() / "missing.schema.json"), Error);
}
