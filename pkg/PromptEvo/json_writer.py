import json


class JSONWriter:
    @staticmethod
    def dumps(data):
        return json.dumps(data, indent=4, sort_keys=True, ensure_ascii=False)

    @staticmethod
    def dumps_line(record):
        # Sorted keys keep repeated runs byte-identical.
        return json.dumps(record, sort_keys=True, ensure_ascii=False)

    @staticmethod
    def write(data, output_path):
        with open(output_path, "w", encoding="utf-8") as file:
            file.write(JSONWriter.dumps(data) + "\n")

    @staticmethod
    def append_line(record, output_file):
        """Append one record to an open line-delimited JSON file."""
        output_file.write(JSONWriter.dumps_line(record) + "\n")
        output_file.flush()
