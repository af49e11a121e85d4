from quadlink.resources import resource_bytes, resource_text
