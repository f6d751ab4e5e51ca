"""
@File       : __init__.py
@Description: 

@Time       : 2026/01/06 20:02
@Author     : hcy18
"""
